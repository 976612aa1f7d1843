//! Box-constrained maximization over modulation `V` and gain `G`.
//!
//! The power constraint `G <= G_max(V)` is a curved boundary, so the gain is
//! reparametrized as `G = 1 + u (G_max(V) - 1)` with `u` in `[0, 1]` and `V`
//! is searched in `s`, a normalized logarithm of `V - 1`. A coarse scan over
//! the `(s, u)` square picks a starting cell which a compass search then
//! polishes. A second polish restricted to `u = 0` keeps the unamplified
//! optimum available, so ties resolve to `G = 1`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerSettings {
    pub v_range: (f64, f64),
    /// Coarse points in `V`, log-spaced in `V - 1`.
    pub v_grid: usize,
    /// Coarse points in the normalized gain `u`.
    pub g_grid: usize,
    /// Step halvings of the compass search.
    pub refine_iters: usize,
    /// Relative tolerance used to break ties in favor of smaller `G`, then smaller `V`.
    pub tol: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self { v_range: (1.0001, 200.0), v_grid: 60, g_grid: 40, refine_iters: 50, tol: 1e-7 }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.v_range;
        if !(lo > 1.0 && hi > lo && hi.is_finite()) {
            return Err(Error::Config(format!("modulation range [{lo}, {hi}] must satisfy 1 < lo < hi")));
        }
        if self.v_grid < 8 || self.g_grid < 8 {
            return Err(Error::Config("coarse grids need at least 8 points".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::Config("tolerance must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Optimum {
    pub v: f64,
    pub g: f64,
    pub value: f64,
    /// Normalized gain, `0` for `G = 1` and `1` on the constraint boundary.
    pub u: f64,
    pub constraint_active: bool,
}

struct Search<'a, F, B> {
    objective: F,
    g_max_of_v: B,
    settings: &'a OptimizerSettings,
    log_lo: f64,
    log_span: f64,
}

impl<F, B> Search<'_, F, B>
where
    F: FnMut(f64, f64) -> Result<f64>,
    B: Fn(f64) -> f64,
{
    fn point(&self, s: f64, u: f64) -> (f64, f64) {
        let v = 1.0 + (self.log_lo + s * self.log_span).exp();
        let g_max = (self.g_max_of_v)(v).max(1.0);
        (v, 1.0 + u * (g_max - 1.0))
    }

    fn eval(&mut self, s: f64, u: f64) -> Result<f64> {
        let (v, g) = self.point(s, u);
        let value = (self.objective)(v, g)?;
        if value.is_nan() {
            return Err(Error::Numerical(format!("objective is NaN at V = {v}, G = {g}")));
        }
        Ok(value)
    }

    fn polish(&mut self, mut s: f64, mut u: f64, mut value: f64, free_gain: bool) -> Result<(f64, f64, f64)> {
        let mut step_s = 1.0 / (self.settings.v_grid - 1) as f64;
        let mut step_u = if free_gain { 1.0 / (self.settings.g_grid - 1) as f64 } else { 0.0 };
        let mut halvings = 0;
        let mut moves = 0;
        let max_moves = 20 * self.settings.refine_iters.max(1);
        while halvings < self.settings.refine_iters && moves < max_moves {
            let mut best: Option<(f64, f64, f64)> = None;
            let mut candidates = vec![((s + step_s).min(1.0), u), ((s - step_s).max(0.0), u)];
            if free_gain {
                candidates.push((s, (u + step_u).min(1.0)));
                candidates.push((s, (u - step_u).max(0.0)));
            }
            for (cs, cu) in candidates {
                if cs == s && cu == u {
                    continue;
                }
                let cv = self.eval(cs, cu)?;
                if cv > value && best.is_none_or(|b| cv > b.2) {
                    best = Some((cs, cu, cv));
                }
            }
            match best {
                Some((bs, bu, bv)) => {
                    s = bs;
                    u = bu;
                    value = bv;
                    moves += 1;
                }
                None => {
                    step_s *= 0.5;
                    step_u *= 0.5;
                    halvings += 1;
                    if step_s < 1e-13 && (!free_gain || step_u < 1e-13) {
                        break;
                    }
                }
            }
        }
        Ok((s, u, value))
    }

    fn run(&mut self, free_gain: bool) -> Result<Optimum> {
        let nv = self.settings.v_grid;
        let nu = if free_gain { self.settings.g_grid } else { 1 };
        let mut grid = Vec::with_capacity(nv * nu);
        for j in 0..nu {
            let u = if nu == 1 { 0.0 } else { j as f64 / (nu - 1) as f64 };
            for i in 0..nv {
                let s = i as f64 / (nv - 1) as f64;
                grid.push((s, u, self.eval(s, u)?));
            }
        }
        let tie = |best: f64| self.settings.tol * best.abs();
        let pick = |cells: &mut dyn Iterator<Item = &(f64, f64, f64)>| -> (f64, f64, f64) {
            let cells: Vec<_> = cells.copied().collect();
            let best = cells.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max);
            // grid is ordered by u, then s: the first near-best cell has the smallest G, then V
            *cells.iter().find(|c| c.2 >= best - tie(best)).expect("grid is non-empty")
        };
        let start = pick(&mut grid.iter());
        let (s, u, value) = self.polish(start.0, start.1, start.2, free_gain)?;
        let (s, u, value) = if free_gain {
            let row = pick(&mut grid.iter().filter(|c| c.1 == 0.0));
            let (s0, _, v0) = self.polish(row.0, 0.0, row.2, false)?;
            if value > v0 + tie(v0) {
                (s, u, value)
            } else {
                (s0, 0.0, v0)
            }
        } else {
            (s, u, value)
        };
        let (v, g) = self.point(s, u);
        Ok(Optimum { v, g, value, u, constraint_active: free_gain && u > 0.999 })
    }
}

/// Maximizes `objective(V, G)` over `V` in the settings range and
/// `1 <= G <= max(1, g_max_of_v(V))`. Every probed point is feasible.
pub fn optimize_vg<F, B>(objective: F, g_max_of_v: B, settings: &OptimizerSettings) -> Result<Optimum>
where
    F: FnMut(f64, f64) -> Result<f64>,
    B: Fn(f64) -> f64,
{
    search(objective, g_max_of_v, settings, true)
}

/// Maximizes `objective(V)` at unit gain.
pub fn optimize_v<F>(mut objective: F, settings: &OptimizerSettings) -> Result<Optimum>
where
    F: FnMut(f64) -> Result<f64>,
{
    search(move |v, _| objective(v), |_| 1.0, settings, false)
}

fn search<F, B>(objective: F, g_max_of_v: B, settings: &OptimizerSettings, free_gain: bool) -> Result<Optimum>
where
    F: FnMut(f64, f64) -> Result<f64>,
    B: Fn(f64) -> f64,
{
    settings.validate()?;
    let log_lo = (settings.v_range.0 - 1.0).ln();
    let log_span = (settings.v_range.1 - 1.0).ln() - log_lo;
    Search { objective, g_max_of_v, settings, log_lo, log_span }.run(free_gain)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bisection {
    Root(f64),
    /// `f` is positive at both ends (`positive = true`) or at neither.
    NoSignChange {
        positive: bool,
    },
}

/// Bisection on the sign of `f` (positive versus non-positive) until the
/// bracket is narrower than `tol`.
pub fn bisect_sign_change<F>(mut f: F, bracket: (f64, f64), tol: f64) -> Result<Bisection>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut lo, mut hi) = bracket;
    let lo_pos = f(lo)? > 0.0;
    let hi_pos = f(hi)? > 0.0;
    if lo_pos == hi_pos {
        return Ok(Bisection::NoSignChange { positive: lo_pos });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if (f(mid)? > 0.0) == lo_pos {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Bisection::Root(0.5 * (lo + hi)))
}

/// Largest index `i < n` with `pred(i)` true, for a predicate that is true
/// on a prefix of `0..n` and false afterwards.
pub fn last_true_index<F>(n: usize, mut pred: F) -> Result<Option<usize>>
where
    F: FnMut(usize) -> Result<bool>,
{
    if n == 0 || !pred(0)? {
        return Ok(None);
    }
    let (mut good, mut bad) = (0, n);
    while bad - good > 1 {
        let mid = good + (bad - good) / 2;
        if pred(mid)? {
            good = mid;
        } else {
            bad = mid;
        }
    }
    Ok(Some(good))
}

//! Bounded search for violations of universally quantified norm conditions.
//!
//! A search maximizes an objective over the ball of a grid shape in `X`
//! (square grids are `M_n(X)`). Restarts are independent: each owns a random
//! stream derived from the master seed, a search key and its index, and the
//! merge is ordered, so results do not depend on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{stream_key, RngStream};
use crate::opspace::{LevelElement, SpaceRep};

/// Largest ambient size `level · max(p, q)` a search may realize.
pub const MAX_AMBIENT: usize = 512;

const FD_REL_STEP: f64 = 1e-5;
const MIN_STEP: f64 = 1e-7;
/// Gains this small (relative) count as stalling and halve the step.
const NEGLIGIBLE_GAIN: f64 = 1e-12;
const FULL_GRADIENT_PARAMS: usize = 24;
const RANDOM_DIRECTIONS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub tolerance: f64,
    pub max_level: usize,
    pub radius: f64,
    pub restarts: usize,
    pub ascent_steps: usize,
    pub step_size: f64,
    pub circle_samples: usize,
    pub t_max: f64,
    pub b_samples: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_level: 2,
            radius: 0.5,
            restarts: 64,
            ascent_steps: 200,
            step_size: 0.05,
            circle_samples: 720,
            t_max: 4.0,
            b_samples: 64,
            seed: crate::DEFAULT_SEED,
        }
    }
}

impl SearchConfig {
    /// Checks parameter ranges and the ambient size guard for a `p × q`
    /// space. `restarts = 0` is accepted and yields an empty search.
    pub fn validate(&self, p: usize, q: usize) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("tolerance", self.tolerance)?;
        positive("radius", self.radius)?;
        positive("step_size", self.step_size)?;
        positive("t_max", self.t_max)?;
        for (name, v) in [
            ("max_level", self.max_level),
            ("ascent_steps", self.ascent_steps),
            ("circle_samples", self.circle_samples),
            ("b_samples", self.b_samples),
        ] {
            if v == 0 {
                return Err(Error::InvalidInput(format!("{name} must be positive")));
            }
        }
        if self.max_level * p.max(q) > MAX_AMBIENT {
            return Err(Error::InvalidInput(format!(
                "max_level {} with a {p}x{q} ambient exceeds the size guard {MAX_AMBIENT}",
                self.max_level
            )));
        }
        Ok(())
    }
}

/// Grid shape searched over: `rows × cols` cells, each a coefficient vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridShape {
    pub rows: usize,
    pub cols: usize,
}

impl GridShape {
    pub fn square(n: usize) -> Self {
        Self { rows: n, cols: n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartTrace {
    pub restart: usize,
    pub radius: f64,
    pub start_norm: f64,
    pub evaluations: u64,
    pub aborted: bool,
    /// Objective value after each accepted step, starting with the start point.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    /// `-inf` when no restart produced a finite value.
    pub best_value: f64,
    pub best_point: Option<LevelElement<f64>>,
    pub evaluations: u64,
    pub restart_bests: Vec<Option<f64>>,
    pub trace: Vec<RestartTrace>,
}

impl SearchResult {
    fn empty() -> Self {
        Self {
            best_value: f64::NEG_INFINITY,
            best_point: None,
            evaluations: 0,
            restart_bests: Vec::new(),
            trace: Vec::new(),
        }
    }

    /// Number of restarts that produced at least one finite value.
    pub fn samples(&self) -> usize {
        self.restart_bests.iter().filter(|b| b.is_some()).count()
    }

    /// Ordered merge: keeps the larger value, earlier search on ties.
    pub fn merge(mut self, other: SearchResult) -> SearchResult {
        if other.best_value > self.best_value || self.best_point.is_none() && other.best_point.is_some() {
            self.best_value = other.best_value;
            self.best_point = other.best_point;
        }
        self.evaluations += other.evaluations;
        self.restart_bests.extend(other.restart_bests);
        self.trace.extend(other.trace);
        self
    }
}

/// What to search: grid shape and the ball radii assigned round-robin to
/// restarts.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchDomain {
    pub shape: GridShape,
    pub radii: Vec<f64>,
}

impl SearchDomain {
    pub fn new(shape: GridShape, radii: Vec<f64>) -> Self {
        assert!(!radii.is_empty(), "at least one radius is required");
        Self { shape, radii }
    }
}

struct Ball<'a> {
    space: &'a SpaceRep<f64>,
    shape: GridShape,
    radius: f64,
}

impl Ball<'_> {
    fn point(&self, params: &[f64]) -> LevelElement<f64> {
        LevelElement::from_params(self.shape.rows, self.shape.cols, self.space.dim(), params)
    }

    /// Projects onto the ball and returns the point with its norm.
    fn project(&self, params: &[f64]) -> Option<(Vec<f64>, f64)> {
        let x = self.point(params);
        let n = self.space.norm(&x).ok()?;
        if !n.is_finite() {
            return None;
        }
        if n <= self.radius {
            Some((params.to_vec(), n))
        } else {
            let s = self.radius / n;
            Some((params.iter().map(|v| v * s).collect(), self.radius))
        }
    }
}

struct Climber<'a, F> {
    ball: Ball<'a>,
    objective: &'a F,
    evaluations: u64,
}

impl<F> Climber<'_, F>
where
    F: Fn(&LevelElement<f64>, f64) -> f64,
{
    /// Projects and evaluates; `None` marks a non-finite value.
    fn eval(&mut self, params: &[f64]) -> Option<(Vec<f64>, f64)> {
        let (p, n) = self.ball.project(params)?;
        self.evaluations += 1;
        let v = (self.objective)(&self.ball.point(&p), n);
        v.is_finite().then_some((p, v))
    }

    fn gradient(&mut self, x: &[f64], rng: Option<&mut RngStream>) -> Option<Vec<f64>> {
        let h = FD_REL_STEP * self.ball.radius;
        let dirs: Vec<Vec<f64>> = match rng {
            Some(rng) if x.len() > FULL_GRADIENT_PARAMS => (0..RANDOM_DIRECTIONS)
                .map(|_| {
                    let d: Vec<f64> = (0..x.len()).map(|_| rng.normal()).collect();
                    let n = d.iter().map(|v| v * v).sum::<f64>().sqrt();
                    d.into_iter().map(|v| v / n).collect()
                })
                .collect(),
            _ => (0..x.len())
                .map(|i| {
                    let mut d = vec![0.0; x.len()];
                    d[i] = 1.0;
                    d
                })
                .collect(),
        };
        let mut g = vec![0.0; x.len()];
        for d in &dirs {
            let plus: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + h * b).collect();
            let minus: Vec<f64> = x.iter().zip(d).map(|(a, b)| a - h * b).collect();
            let (_, fp) = self.eval(&plus)?;
            let (_, fm) = self.eval(&minus)?;
            let slope = (fp - fm) / (2.0 * h);
            for (gi, di) in g.iter_mut().zip(d) {
                *gi += slope * di;
            }
        }
        Some(g)
    }

    /// Step-halving ascent from an already evaluated point. Returns the best
    /// point, its value, the accepted history and whether a non-finite value
    /// aborted the climb.
    fn ascend(
        &mut self,
        start: (Vec<f64>, f64),
        steps: usize,
        step: f64,
        mut rng: Option<&mut RngStream>,
    ) -> (Vec<f64>, f64, Vec<f64>, bool) {
        let (mut x, mut fx) = start;
        let mut history = vec![fx];
        let mut alpha = step;
        let mut grad: Option<Vec<f64>> = None;
        for _ in 0..steps {
            // a rejected step leaves x unchanged, so its gradient is reused
            let g = match grad.take() {
                Some(g) => g,
                None => match self.gradient(&x, rng.as_deref_mut()) {
                    Some(g) => g,
                    None => return (x, fx, history, true),
                },
            };
            let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if gn == 0.0 || !gn.is_finite() {
                break;
            }
            let scale = alpha * self.ball.radius / gn;
            let cand: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + scale * b).collect();
            match self.eval(&cand) {
                None => return (x, fx, history, true),
                Some((p, v)) if v > fx => {
                    if v - fx <= NEGLIGIBLE_GAIN * (1.0 + fx.abs()) {
                        alpha *= 0.5;
                    }
                    x = p;
                    fx = v;
                    history.push(v);
                }
                Some(_) => {
                    grad = Some(g);
                    alpha *= 0.5;
                }
            }
            if alpha < MIN_STEP {
                break;
            }
        }
        (x, fx, history, false)
    }
}

fn run_restart<F>(
    objective: &F,
    space: &SpaceRep<f64>,
    domain: &SearchDomain,
    cfg: &SearchConfig,
    seed: u64,
    restart: usize,
) -> (Option<(LevelElement<f64>, f64)>, RestartTrace)
where
    F: Fn(&LevelElement<f64>, f64) -> f64,
{
    let radius = domain.radii[restart % domain.radii.len()];
    let mut rng = RngStream::new(seed, restart as u64);
    let shape = domain.shape;
    let start_norm = radius * 0.01f64.powf(rng.uniform());
    let raw = LevelElement::random(shape.rows, shape.cols, space.dim(), &mut rng);
    let mut climber = Climber { ball: Ball { space, shape, radius }, objective, evaluations: 0 };
    let mut trace = RestartTrace { restart, radius, start_norm, evaluations: 0, aborted: false, history: Vec::new() };
    let start = space
        .norm(&raw)
        .ok()
        .filter(|n| n.is_finite() && *n > 0.0)
        .and_then(|n| climber.eval(&raw.scale_real(start_norm / n).to_params()));
    let Some(start) = start else {
        log::warn!("restart {restart}: non-finite objective at the start point, restart skipped");
        trace.aborted = true;
        trace.evaluations = climber.evaluations;
        return (None, trace);
    };
    let (x, fx, history, aborted) = climber.ascend(start, cfg.ascent_steps, cfg.step_size, Some(&mut rng));
    if aborted {
        log::warn!("restart {restart}: non-finite objective during ascent, keeping the best point so far");
    }
    trace.evaluations = climber.evaluations;
    trace.aborted = aborted;
    trace.history = history;
    (Some((climber.ball.point(&x), fx)), trace)
}

/// Maximizes `objective(x, ‖x‖)` over the ball(s) of `domain`.
///
/// `key` separates the random streams of different searches under one
/// master seed.
pub fn maximize_violation<F>(
    objective: &F,
    space: &SpaceRep<f64>,
    domain: &SearchDomain,
    cfg: &SearchConfig,
    key: &[u64],
) -> SearchResult
where
    F: Fn(&LevelElement<f64>, f64) -> f64 + Sync,
{
    let mut parts = vec![cfg.seed];
    parts.extend_from_slice(key);
    let seed = stream_key(&parts);
    let runs: Vec<_> =
        (0..cfg.restarts).into_par_iter().map(|r| run_restart(objective, space, domain, cfg, seed, r)).collect();
    let mut out = SearchResult::empty();
    for (found, trace) in runs {
        out.evaluations += trace.evaluations;
        match found {
            Some((x, v)) => {
                if v > out.best_value || out.best_point.is_none() {
                    out.best_value = v;
                    out.best_point = Some(x);
                }
                out.restart_bests.push(Some(v));
            }
            None => out.restart_bests.push(None),
        }
        out.trace.push(trace);
    }
    out
}

/// Local polish from `point` with a tenth of the step and four times the
/// steps, using the full coordinate gradient. Never lowers the value.
pub fn refine_witness<F>(
    objective: &F,
    space: &SpaceRep<f64>,
    point: &LevelElement<f64>,
    radius: f64,
    cfg: &SearchConfig,
) -> SearchResult
where
    F: Fn(&LevelElement<f64>, f64) -> f64,
{
    let shape = GridShape { rows: point.rows(), cols: point.cols() };
    let mut climber = Climber { ball: Ball { space, shape, radius }, objective, evaluations: 0 };
    let mut trace =
        RestartTrace { restart: 0, radius, start_norm: f64::NAN, evaluations: 0, aborted: false, history: Vec::new() };
    let Some(start) = climber.eval(&point.to_params()) else {
        trace.aborted = true;
        trace.evaluations = climber.evaluations;
        return SearchResult {
            best_value: f64::NEG_INFINITY,
            best_point: None,
            evaluations: trace.evaluations,
            restart_bests: vec![None],
            trace: vec![trace],
        };
    };
    trace.start_norm = climber.ball.project(&start.0).map_or(f64::NAN, |(_, n)| n);
    let (x, fx, history, aborted) = climber.ascend(start, 4 * cfg.ascent_steps, cfg.step_size / 10.0, None);
    trace.evaluations = climber.evaluations;
    trace.aborted = aborted;
    trace.history = history;
    SearchResult {
        best_value: fx,
        best_point: Some(climber.ball.point(&x)),
        evaluations: trace.evaluations,
        restart_bests: vec![Some(fx)],
        trace: vec![trace],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gadgets::four_rotation_max;
    use crate::scalar::c;

    fn linf3() -> SpaceRep<f64> {
        SpaceRep::diagonal(3).unwrap()
    }

    fn e1() -> Vec<crate::scalar::C<f64>> {
        vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]
    }

    #[test]
    fn norm_objective_reaches_sphere() {
        let space = SpaceRep::<f64>::full_matrix(2).unwrap();
        let cfg = SearchConfig { restarts: 4, ascent_steps: 50, ..SearchConfig::default() };
        let domain = SearchDomain::new(GridShape::square(1), vec![1.0]);
        let r = maximize_violation(&|_: &LevelElement<f64>, n: f64| n, &space, &domain, &cfg, &[1]);
        assert!((r.best_value - 1.0).abs() < 1e-4, "{}", r.best_value);
        assert_eq!(r.samples(), 4);
    }

    #[test]
    fn finds_sup_norm_witness() {
        let space = linf3();
        let u = e1();
        let obj = |x: &LevelElement<f64>, n: f64| (1.0 + n).sqrt() - four_rotation_max(&space, &u, x).unwrap();
        let cfg = SearchConfig { restarts: 8, ..SearchConfig::default() };
        let domain = SearchDomain::new(GridShape::square(1), vec![1.0]);
        let r = maximize_violation(&obj, &space, &domain, &cfg, &[2]);
        assert!(r.best_value >= 2f64.sqrt() - 1.0 - 1e-3, "{}", r.best_value);

        let witness = LevelElement::scalar(&[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let refined = refine_witness(&obj, &space, &witness, 1.0, &cfg);
        assert!(refined.best_value >= 2f64.sqrt() - 1.0 - 1e-9);
    }

    #[test]
    fn refinement_is_monotone_and_fixes_zero() {
        let space = SpaceRep::<f64>::full_matrix(2).unwrap();
        let cfg = SearchConfig::default();
        let obj = |_: &LevelElement<f64>, n: f64| -n;
        let r = refine_witness(&obj, &space, &LevelElement::zeros(1, 1, 4), 1.0, &cfg);
        assert_eq!(r.best_value, 0.0);
        let hist = &r.trace[0].history;
        assert!(hist.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn histories_are_monotone_and_feasible() {
        let space = SpaceRep::<f64>::full_matrix(2).unwrap();
        let cfg = SearchConfig { restarts: 3, ascent_steps: 30, ..SearchConfig::default() };
        let domain = SearchDomain::new(GridShape::square(2), vec![0.5]);
        let max_seen = std::sync::Mutex::new(0.0f64);
        let obj = |x: &LevelElement<f64>, n: f64| {
            let mut m = max_seen.lock().unwrap();
            *m = m.max(n);
            x.coeffs()[0].re - n * n
        };
        let r = maximize_violation(&obj, &space, &domain, &cfg, &[3]);
        assert!(*max_seen.lock().unwrap() <= 0.5 + 1e-9);
        for t in &r.trace {
            assert!(t.history.windows(2).all(|w| w[1] >= w[0]));
        }
    }

    #[test]
    fn non_finite_objective_aborts_restarts() {
        let space = linf3();
        let cfg = SearchConfig { restarts: 3, ..SearchConfig::default() };
        let domain = SearchDomain::new(GridShape::square(1), vec![1.0]);
        let r = maximize_violation(&|_: &LevelElement<f64>, _: f64| f64::NAN, &space, &domain, &cfg, &[4]);
        assert_eq!(r.samples(), 0);
        assert!(r.best_point.is_none());
        assert!(r.trace.iter().all(|t| t.aborted));
    }

    #[test]
    fn independent_of_thread_count() {
        let space = linf3();
        let u = e1();
        let obj = |x: &LevelElement<f64>, n: f64| (1.0 + n).sqrt() - four_rotation_max(&space, &u, x).unwrap();
        let cfg = SearchConfig { restarts: 6, ascent_steps: 40, ..SearchConfig::default() };
        let domain = SearchDomain::new(GridShape::square(2), vec![0.25, 1.0]);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| maximize_violation(&obj, &space, &domain, &cfg, &[5]))
        };
        let (a, b) = (run(1), run(8));
        assert_eq!(a.best_value.to_bits(), b.best_value.to_bits());
        assert_eq!(a.best_point, b.best_point);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn config_validation() {
        let cfg = SearchConfig::default();
        assert!(cfg.validate(64, 64).is_ok());
        assert!(cfg.validate(257, 257).is_err());
        assert!(SearchConfig { tolerance: 0.0, ..cfg.clone() }.validate(2, 2).is_err());
        assert!(SearchConfig { max_level: 0, ..cfg.clone() }.validate(2, 2).is_err());
        assert!(SearchConfig { restarts: 0, ..cfg }.validate(2, 2).is_ok());
    }
}

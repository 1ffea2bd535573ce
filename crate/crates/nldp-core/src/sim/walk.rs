//! The path walker and its public entry points.

use super::{
    ExitMode, ExitRecord, ExitRule, HazardRule, PathState, RngStream, SimConfig, BOUNDARY_TOL,
};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::problem::{Domain, ProblemSpec};

/// One row of an optional per-step trace.
#[derive(Clone, Debug)]
pub struct TraceRow {
    pub step: u64,
    pub time: f64,
    pub position: Vec<f64>,
    pub hazard_accum: f64,
    pub event: &'static str,
}

/// Outcome of a killed run.
#[derive(Clone, Debug)]
pub enum KilledOutcome {
    /// The hazard clock fired. `position` is the interpolated pre-death
    /// position of the continuous path.
    Died { time: f64, position: Vec<f64> },
    /// The horizon was reached first.
    Survived { time: f64, position: Vec<f64> },
}

#[derive(Clone, Debug)]
pub struct KilledRecord {
    pub outcome: KilledOutcome,
    /// Accumulated `int_0^stop e^{-alpha t} f(X_t) dt` when a functional was
    /// requested, else 0.
    pub integral: f64,
    pub n_steps: u64,
    /// `int_0^stop kappa(X_t) dt`.
    pub total_hazard: f64,
}

/// Outcome of running the full jump-diffusion to a fixed horizon.
#[derive(Clone, Debug)]
pub struct HorizonRecord {
    pub position: Vec<f64>,
    pub time: f64,
    pub n_jumps: u64,
    pub n_steps: u64,
    pub integral: f64,
}

/// Outcome of a killed run additionally stopped at a domain exit.
#[derive(Clone, Debug)]
pub struct StoppedRecord {
    /// `int kappa ds` up to the earlier of death, domain exit, horizon.
    pub total_hazard: f64,
    pub time: f64,
    pub died: bool,
    pub n_steps: u64,
}

/// Advance the continuous part by one step of length `dt`: Euler increment
/// plus hazard accumulation (left-point here; the walker's trapezoid rule
/// needs the previous intensity, which a single stateless step does not have).
/// No jump or exit decision is taken.
pub fn step_diffusion(
    spec: &ProblemSpec,
    state: &PathState,
    dt: f64,
    rng: &mut RngStream,
) -> Result<PathState> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Precondition(format!("dt must be positive, got {dt}")));
    }
    let dim = spec.dim();
    let mut next = state.clone();
    let mut z = vec![0.0; dim];
    let mut noise = vec![0.0; dim];
    let mut vel = vec![0.0; dim];
    let mut corr = vec![0.0; dim];
    for zi in z.iter_mut() {
        *zi = rng.normal();
    }
    spec.elliptic.sqrt_mul(&state.position, &z, &mut noise)?;
    spec.drift.eval_into(&state.position, &mut vel);
    spec.elliptic.half_divergence(&state.position, &mut corr);
    let sq = dt.sqrt();
    for j in 0..dim {
        next.position[j] = state.position[j] + (vel[j] + corr[j]) * dt + sq * noise[j];
        if !next.position[j].is_finite() {
            return Err(Error::Evaluation {
                what: "step produced non-finite position".into(),
                point: state.position.clone(),
            });
        }
    }
    if let Some(jumps) = &spec.jumps {
        let k = jumps.kappa.eval(&state.position);
        if !k.is_finite() || k < 0.0 {
            return Err(Error::Evaluation {
                what: format!("jump intensity produced {k}"),
                point: state.position.clone(),
            });
        }
        next.hazard_accum += k * dt;
    }
    next.time += dt;
    Ok(next)
}

/// Run the full jump-diffusion from `x0` until it exits the domain.
pub fn run_until_exit(
    spec: &ProblemSpec,
    x0: &[f64],
    cfg: &SimConfig,
    rng: &mut RngStream,
) -> Result<ExitRecord> {
    run_until_exit_traced(spec, x0, cfg, rng, None)
}

/// As [`run_until_exit`] with an optional per-step trace sink.
pub fn run_until_exit_traced(
    spec: &ProblemSpec,
    x0: &[f64],
    cfg: &SimConfig,
    rng: &mut RngStream,
    trace: Option<&mut Vec<TraceRow>>,
) -> Result<ExitRecord> {
    cfg.check()?;
    if !spec.domain.contains(x0) {
        return Err(Error::Precondition(format!(
            "start point {x0:?} is not inside the domain"
        )));
    }
    let mut w = Walker::new(spec, cfg, Some(&spec.domain), true, None, None, rng, trace)?;
    w.init(x0)?;
    match w.run()? {
        Stop::Exited(rec) => Ok(rec),
        Stop::Died { .. } | Stop::Horizon { .. } => unreachable!("exit run cannot die or time out"),
    }
}

/// Run the killed diffusion (no redistribution) from `x0` up to `horizon`,
/// optionally accumulating `int e^{-alpha t} f(X_t) dt`. The whole space is
/// the state space: the domain plays no role here.
pub fn run_killed(
    spec: &ProblemSpec,
    x0: &[f64],
    cfg: &SimConfig,
    horizon: f64,
    functional: Option<(f64, &dyn ScalarField)>,
    rng: &mut RngStream,
) -> Result<KilledRecord> {
    cfg.check()?;
    check_horizon(cfg, horizon)?;
    let mut w = Walker::new(spec, cfg, None, false, Some(horizon), functional, rng, None)?;
    w.init(x0)?;
    match w.run()? {
        Stop::Died {
            time,
            position,
            integral,
            n_steps,
            total_hazard,
        } => Ok(KilledRecord {
            outcome: KilledOutcome::Died { time, position },
            integral,
            n_steps,
            total_hazard,
        }),
        Stop::Horizon {
            time,
            position,
            integral,
            n_steps,
            total_hazard,
            ..
        } => Ok(KilledRecord {
            outcome: KilledOutcome::Survived { time, position },
            integral,
            n_steps,
            total_hazard,
        }),
        Stop::Exited(_) => unreachable!("no domain in killed run"),
    }
}

/// Run the full jump-diffusion (with redistribution, ignoring any domain)
/// up to `horizon`.
pub fn run_full_horizon(
    spec: &ProblemSpec,
    x0: &[f64],
    cfg: &SimConfig,
    horizon: f64,
    functional: Option<(f64, &dyn ScalarField)>,
    rng: &mut RngStream,
) -> Result<HorizonRecord> {
    cfg.check()?;
    check_horizon(cfg, horizon)?;
    let mut w = Walker::new(spec, cfg, None, true, Some(horizon), functional, rng, None)?;
    w.init(x0)?;
    match w.run()? {
        Stop::Horizon {
            time,
            position,
            integral,
            n_steps,
            n_jumps,
            ..
        } => Ok(HorizonRecord {
            position,
            time,
            n_jumps,
            n_steps,
            integral,
        }),
        Stop::Died { .. } | Stop::Exited(_) => unreachable!("horizon run neither dies nor exits"),
    }
}

/// Run the killed diffusion stopped at the exit from `domain` (not
/// necessarily the problem's own domain) or at `horizon`, and report the
/// integrated intensity up to the stop. Used for small-ball decay profiles.
pub fn run_killed_stopped(
    spec: &ProblemSpec,
    domain: &Domain,
    x0: &[f64],
    cfg: &SimConfig,
    horizon: f64,
    rng: &mut RngStream,
) -> Result<StoppedRecord> {
    cfg.check()?;
    check_horizon(cfg, horizon)?;
    if !domain.contains(x0) {
        return Err(Error::Precondition(format!(
            "start point {x0:?} is not inside the stopping domain"
        )));
    }
    let mut w = Walker::new(spec, cfg, Some(domain), false, Some(horizon), None, rng, None)?;
    w.init(x0)?;
    match w.run()? {
        Stop::Exited(rec) => Ok(StoppedRecord {
            total_hazard: rec.exit_hazard,
            time: rec.exit_time,
            died: false,
            n_steps: rec.n_steps,
        }),
        Stop::Died {
            time,
            total_hazard,
            n_steps,
            ..
        } => Ok(StoppedRecord {
            total_hazard,
            time,
            died: true,
            n_steps,
        }),
        Stop::Horizon {
            time,
            total_hazard,
            n_steps,
            ..
        } => Ok(StoppedRecord {
            total_hazard,
            time,
            died: false,
            n_steps,
        }),
    }
}

enum Stop {
    Exited(ExitRecord),
    Died {
        time: f64,
        position: Vec<f64>,
        integral: f64,
        n_steps: u64,
        total_hazard: f64,
    },
    Horizon {
        time: f64,
        position: Vec<f64>,
        integral: f64,
        n_steps: u64,
        n_jumps: u64,
        total_hazard: f64,
    },
}

fn check_horizon(cfg: &SimConfig, horizon: f64) -> Result<()> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Precondition(format!(
            "horizon must be positive and finite, got {horizon}"
        )));
    }
    let budget = cfg.max_steps as f64 * cfg.dt_base;
    if horizon > budget * (1.0 + 1e-12) {
        return Err(Error::TruncationBudget { horizon, budget });
    }
    Ok(())
}

struct Walker<'a> {
    spec: &'a ProblemSpec,
    cfg: &'a SimConfig,
    domain: Option<&'a Domain>,
    redistribute: bool,
    horizon: Option<f64>,
    functional: Option<(f64, &'a dyn ScalarField)>,
    rng: &'a mut RngStream,
    trace: Option<&'a mut Vec<TraceRow>>,
    bridge_coeff: f64,

    x: Vec<f64>,
    t: f64,
    hazard: f64,
    threshold: f64,
    total_hazard: f64,
    kappa_here: f64,
    f_here: f64,
    integral: f64,
    n_jumps: u64,
    n_steps: u64,

    z: Vec<f64>,
    noise: Vec<f64>,
    vel: Vec<f64>,
    corr: Vec<f64>,
    x_new: Vec<f64>,
    x_tmp: Vec<f64>,
}

impl<'a> Walker<'a> {
    #[allow(clippy::too_many_arguments)]
    fn new(
        spec: &'a ProblemSpec,
        cfg: &'a SimConfig,
        domain: Option<&'a Domain>,
        redistribute: bool,
        horizon: Option<f64>,
        functional: Option<(f64, &'a dyn ScalarField)>,
        rng: &'a mut RngStream,
        trace: Option<&'a mut Vec<TraceRow>>,
    ) -> Result<Self> {
        let dim = spec.dim();
        let bridge_coeff = match cfg.exit_rule {
            ExitRule::FirstExteriorSample => 0.0,
            ExitRule::BridgeCorrected => match (domain, spec.elliptic.isotropy()) {
                (None, _) => 0.0,
                (Some(_), Some(a)) => a,
                (Some(_), None) => {
                    return Err(Error::Precondition(
                        "bridge-corrected exits need an isotropic diffusion matrix".into(),
                    ))
                }
            },
        };
        Ok(Walker {
            spec,
            cfg,
            domain,
            redistribute,
            horizon,
            functional,
            rng,
            trace,
            bridge_coeff,
            x: vec![0.0; dim],
            t: 0.0,
            hazard: 0.0,
            threshold: f64::INFINITY,
            total_hazard: 0.0,
            kappa_here: 0.0,
            f_here: 0.0,
            integral: 0.0,
            n_jumps: 0,
            n_steps: 0,
            z: vec![0.0; dim],
            noise: vec![0.0; dim],
            vel: vec![0.0; dim],
            corr: vec![0.0; dim],
            x_new: vec![0.0; dim],
            x_tmp: vec![0.0; dim],
        })
    }

    fn init(&mut self, x0: &[f64]) -> Result<()> {
        self.x.copy_from_slice(x0);
        self.t = 0.0;
        self.hazard = 0.0;
        self.total_hazard = 0.0;
        self.integral = 0.0;
        self.n_jumps = 0;
        self.n_steps = 0;
        self.threshold = if self.spec.jumps.is_some() {
            self.rng.exp1()
        } else {
            f64::INFINITY
        };
        self.kappa_here = self.eval_kappa_at_x()?;
        self.f_here = self.eval_functional(&self.x)?;
        Ok(())
    }

    fn eval_kappa_at_x(&self) -> Result<f64> {
        match &self.spec.jumps {
            None => Ok(0.0),
            Some(j) => {
                let k = j.kappa.eval(&self.x);
                if !k.is_finite() || k < 0.0 {
                    return Err(Error::Evaluation {
                        what: format!("jump intensity produced {k}"),
                        point: self.x.clone(),
                    });
                }
                Ok(k)
            }
        }
    }

    fn eval_functional(&self, at: &[f64]) -> Result<f64> {
        match self.functional {
            None => Ok(0.0),
            Some((_, f)) => {
                let v = f.eval(at);
                if !v.is_finite() {
                    return Err(Error::Evaluation {
                        what: format!("integrand produced {v}"),
                        point: at.to_vec(),
                    });
                }
                Ok(v)
            }
        }
    }

    fn record(&mut self, event: &'static str) {
        if let Some(tr) = self.trace.as_deref_mut() {
            tr.push(TraceRow {
                step: self.n_steps,
                time: self.t,
                position: self.x.clone(),
                hazard_accum: self.hazard,
                event,
            });
        }
    }

    /// `sd` is the signed distance at the current position, required
    /// whenever a domain is present; the caller computes it once per step
    /// and reuses it for the bridge test.
    fn effective_dt(&self, sd: Option<f64>) -> f64 {
        let base = self.cfg.dt_base;
        let mut dt = match (self.domain, sd) {
            (None, _) => base,
            (Some(_), Some(sd)) => {
                let cap =
                    self.cfg.dt_boundary_factor * sd * sd / (self.spec.elliptic.lambda() * base);
                // floor keeps paths hugging the boundary from stalling
                base * cap.clamp(1e-9, 1.0)
            }
            (Some(_), None) => unreachable!("caller supplies the distance when a domain exists"),
        };
        if let Some(h) = self.horizon {
            dt = dt.min(h - self.t);
        }
        dt
    }

    fn run(&mut self) -> Result<Stop> {
        self.record("start");
        loop {
            if let Some(h) = self.horizon {
                if self.t >= h - 1e-15 * h {
                    self.record("horizon");
                    return Ok(Stop::Horizon {
                        time: self.t,
                        position: self.x.clone(),
                        integral: self.integral,
                        n_steps: self.n_steps,
                        n_jumps: self.n_jumps,
                        total_hazard: self.total_hazard,
                    });
                }
            }
            // one extra budgeted step per jump: jumps truncate steps
            if self.n_steps >= self.cfg.max_steps + self.n_jumps {
                return Err(Error::NonExit {
                    max_steps: self.cfg.max_steps,
                    start: self.x.clone(),
                });
            }
            let sd_here = self.domain.map(|d| d.signed_distance(&self.x));
            let dt = self.effective_dt(sd_here);
            self.n_steps += 1;

            // continuous proposal over [t, t + dt]
            for zi in self.z.iter_mut() {
                *zi = self.rng.normal();
            }
            self.spec.elliptic.sqrt_mul(&self.x, &self.z, &mut self.noise)?;
            self.spec.drift.eval_into(&self.x, &mut self.vel);
            self.spec.elliptic.half_divergence(&self.x, &mut self.corr);
            let sq = dt.sqrt();
            for j in 0..self.x.len() {
                self.x_new[j] = self.x[j] + (self.vel[j] + self.corr[j]) * dt + sq * self.noise[j];
                if !self.x_new[j].is_finite() {
                    return Err(Error::Evaluation {
                        what: "step produced non-finite position".into(),
                        point: self.x.clone(),
                    });
                }
            }

            // hazard increment over the step
            let (dh, kappa_new) = match &self.spec.jumps {
                None => (0.0, 0.0),
                Some(j) => {
                    let k1 = j.kappa.eval(&self.x_new);
                    if !k1.is_finite() || k1 < 0.0 {
                        return Err(Error::Evaluation {
                            what: format!("jump intensity produced {k1}"),
                            point: self.x_new.clone(),
                        });
                    }
                    let dh = match self.cfg.hazard_rule {
                        HazardRule::Trapezoid => 0.5 * (self.kappa_here + k1) * dt,
                        HazardRule::LeftPoint => self.kappa_here * dt,
                    };
                    (dh, k1)
                }
            };

            if dh > 0.0 && self.hazard + dh >= self.threshold {
                // threshold crossed inside this step
                let theta = ((self.threshold - self.hazard) / dh).clamp(0.0, 1.0);
                let t_event = self.t + theta * dt;
                for j in 0..self.x.len() {
                    self.x_tmp[j] = self.x[j] + theta * (self.x_new[j] - self.x[j]);
                }
                if let Some((alpha, _)) = self.functional {
                    let f_pre = self.eval_functional(&self.x_tmp)?;
                    self.integral +=
                        discounted_segment(alpha, self.t, theta * dt, self.f_here, f_pre);
                }
                self.total_hazard += self.threshold - self.hazard;

                if !self.redistribute {
                    self.t = t_event;
                    self.x.copy_from_slice(&self.x_tmp);
                    self.record("death");
                    return Ok(Stop::Died {
                        time: t_event,
                        position: self.x.clone(),
                        integral: self.integral,
                        n_steps: self.n_steps,
                        total_hazard: self.total_hazard,
                    });
                }

                if self.n_jumps >= self.cfg.max_jumps {
                    return Err(Error::JumpBudget {
                        max_jumps: self.cfg.max_jumps,
                    });
                }
                let nu = &self.spec.jumps.as_ref().unwrap().nu;
                // nu(x, {x}) = 0: a draw equal to the pre-jump point (possible
                // only for atoms) is redrawn
                let mut ok = false;
                for _ in 0..8 {
                    nu.sample_into(self.rng, &mut self.z);
                    if self.z != self.x_tmp {
                        ok = true;
                        break;
                    }
                }
                if !ok {
                    return Err(Error::Evaluation {
                        what: "redistribution law concentrated on the current point".into(),
                        point: self.x_tmp.clone(),
                    });
                }
                self.n_jumps += 1;
                self.t = t_event;
                self.x.copy_from_slice(&self.z);
                self.hazard = 0.0;
                self.threshold = self.rng.exp1();
                self.kappa_here = self.eval_kappa_at_x()?;
                self.f_here = self.eval_functional(&self.x)?;
                self.record("jump");

                if let Some(dom) = self.domain {
                    let sd = dom.signed_distance(&self.x);
                    if !dom.contains(&self.x) || sd.abs() <= BOUNDARY_TOL {
                        self.record("exit");
                        return Ok(Stop::Exited(ExitRecord {
                            exit_point: self.x.clone(),
                            exit_time: t_event,
                            n_jumps: self.n_jumps,
                            n_steps: self.n_steps,
                            mode: ExitMode::JumpedOutside,
                            boundary_jump: sd.abs() <= BOUNDARY_TOL,
                            exit_hazard: self.total_hazard,
                        }));
                    }
                }
                continue;
            }

            // no jump: commit the step
            if let Some((alpha, _)) = self.functional {
                let f_new = self.eval_functional(&self.x_new)?;
                self.integral += discounted_segment(alpha, self.t, dt, self.f_here, f_new);
                self.f_here = f_new;
            }
            self.hazard += dh;
            self.total_hazard += dh;
            let t_old = self.t;
            let sd_old = sd_here;
            self.t += dt;
            std::mem::swap(&mut self.x, &mut self.x_new);
            self.kappa_here = kappa_new;
            self.record("step");

            if let Some(dom) = self.domain {
                if !dom.contains(&self.x) {
                    self.record("exit");
                    return Ok(Stop::Exited(ExitRecord {
                        exit_point: self.x.clone(),
                        exit_time: self.t,
                        n_jumps: self.n_jumps,
                        n_steps: self.n_steps,
                        mode: ExitMode::DiffusedAcross,
                        boundary_jump: false,
                        exit_hazard: self.total_hazard,
                    }));
                }
                if self.bridge_coeff > 0.0 {
                    let d0 = -sd_old.unwrap();
                    let d1 = -dom.signed_distance(&self.x);
                    // skip the draw when the crossing probability is below
                    // the resolution of a uniform sample (e^-40 < 2^-53)
                    let expo = 2.0 * d0 * d1 / (self.bridge_coeff * dt);
                    if d0 > 0.0 && d1 > 0.0 && expo < 40.0 {
                        let p = (-expo).exp();
                        let u: f64 = rand::Rng::random(self.rng);
                        if u < p {
                            if let Some(hit) = self.project_outside(dom, d0, d1) {
                                let frac = d0 / (d0 + d1);
                                self.x.copy_from_slice(&hit);
                                self.t = t_old + frac * dt;
                                self.record("exit");
                                return Ok(Stop::Exited(ExitRecord {
                                    exit_point: self.x.clone(),
                                    exit_time: self.t,
                                    n_jumps: self.n_jumps,
                                    n_steps: self.n_steps,
                                    mode: ExitMode::DiffusedAcross,
                                    boundary_jump: false,
                                    exit_hazard: self.total_hazard,
                                }));
                            }
                            // projection failure: keep walking; the path will
                            // exit by sampling shortly after
                        }
                    }
                }
            }
        }
    }

    /// Nearest boundary point just outside the domain, from whichever step
    /// endpoint is closer to the boundary. Follows the numerical gradient of
    /// the signed distance.
    fn project_outside(&mut self, dom: &Domain, d0: f64, d1: f64) -> Option<Vec<f64>> {
        let from = if d1 <= d0 { &self.x } else { &self.x_new };
        let scale = 1.0 + from.iter().map(|c| c * c).sum::<f64>().sqrt();
        let eps = 1e-6 * scale;
        let mut grad = vec![0.0; from.len()];
        let mut probe = from.clone();
        for j in 0..from.len() {
            probe[j] = from[j] + eps;
            let up = dom.signed_distance(&probe);
            probe[j] = from[j] - eps;
            let dn = dom.signed_distance(&probe);
            probe[j] = from[j];
            grad[j] = (up - dn) / (2.0 * eps);
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return None;
        }
        let mut push = d0.min(d1) + 1e-12 * scale;
        for _ in 0..50 {
            let cand: Vec<f64> = from
                .iter()
                .zip(&grad)
                .map(|(c, g)| c + push * g / norm)
                .collect();
            if !dom.contains(&cand) {
                return Some(cand);
            }
            push *= 1.5;
        }
        None
    }
}

/// Exact integral of `e^{-alpha t}` times the linear interpolant of `f`
/// between the step endpoints, over `[t0, t0 + dt]`.
fn discounted_segment(alpha: f64, t0: f64, dt: f64, f0: f64, f1: f64) -> f64 {
    if dt <= 0.0 {
        return 0.0;
    }
    if alpha == 0.0 {
        return 0.5 * (f0 + f1) * dt;
    }
    let e0 = (-alpha * t0).exp();
    let s = alpha * dt;
    let (i0, i1);
    if s < 1e-5 {
        // series in s to avoid cancellation
        i0 = e0 * dt * (1.0 - 0.5 * s + s * s / 6.0);
        i1 = e0 * dt * (0.5 - s / 3.0 + s * s / 8.0);
    } else {
        let em = (-s).exp();
        i0 = e0 * (1.0 - em) / alpha;
        i1 = e0 * (1.0 - em * (1.0 + s)) / (alpha * alpha * dt);
    }
    f0 * (i0 - i1) + f1 * i1
}

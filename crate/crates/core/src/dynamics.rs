//! Kinematic bicycle model and LQR trajectory tracking.
//!
//! Longitudinal control is a proportional law on speed, lateral control a
//! two-state LQR (lateral offset, heading error) linearised around the
//! reference path with gains scheduled in 1 m/s speed buckets.

use std::sync::OnceLock;

use nalgebra::{DMatrix, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{normalize_angle, Pose2D};
use crate::scene::{Trajectory, SIM_DT, TRAJECTORY_INTERVAL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("Riccati iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("matrix dimensions do not match: {0}")]
    Shape(String),
    #[error("R + B'PB is singular")]
    Singular,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParameters {
    pub wheelbase: f64,
    pub length: f64,
    pub width: f64,
    pub max_steering: f64,
    pub max_steering_rate: f64,
    pub max_acceleration: f64,
}

impl Default for VehicleParameters {
    fn default() -> Self {
        Self { wheelbase: 3.09, length: 4.64, width: 1.90, max_steering: 0.61, max_steering_rate: 0.5, max_acceleration: 4.0 }
    }
}

impl VehicleParameters {
    pub fn half_length(&self) -> f64 {
        self.length / 2.0
    }

    pub fn half_width(&self) -> f64 {
        self.width / 2.0
    }
}

/// Ego state. `(x, y)` is the footprint centre.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BicycleState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub velocity: f64,
    pub steering_angle: f64,
}

impl BicycleState {
    pub fn pose(&self) -> Pose2D {
        Pose2D { x: self.x, y: self.y, heading: self.heading }
    }

    pub fn at_pose(pose: Pose2D, velocity: f64, steering_angle: f64) -> Self {
        Self { x: pose.x, y: pose.y, heading: pose.heading, velocity, steering_angle }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub acceleration: f64,
    pub steering_rate: f64,
}

impl ControlInput {
    pub fn clamped(self, p: &VehicleParameters) -> (ControlInput, bool) {
        let a = self.acceleration.clamp(-p.max_acceleration, p.max_acceleration);
        let r = self.steering_rate.clamp(-p.max_steering_rate, p.max_steering_rate);
        (ControlInput { acceleration: a, steering_rate: r }, a != self.acceleration || r != self.steering_rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: BicycleState,
    /// Set when a control or the steering angle had to be clamped.
    pub saturated: bool,
}

/// Forward-Euler step of the kinematic bicycle model.
///
/// Braking never reverses the vehicle: a forward-moving state that would
/// cross zero speed stops at zero.
pub fn bicycle_step(state: &BicycleState, control: ControlInput, dt: f64, params: &VehicleParameters) -> StepOutcome {
    let (u, mut saturated) = control.clamped(params);
    let v = state.velocity;
    let (s, c) = state.heading.sin_cos();
    let mut velocity = v + u.acceleration * dt;
    if v >= 0.0 && velocity < 0.0 {
        velocity = 0.0;
    }
    let raw_steer = state.steering_angle + u.steering_rate * dt;
    let steering_angle = raw_steer.clamp(-params.max_steering, params.max_steering);
    saturated |= steering_angle != raw_steer;
    let next = BicycleState {
        x: state.x + v * c * dt,
        y: state.y + v * s * dt,
        heading: normalize_angle(state.heading + v * state.steering_angle.tan() / params.wheelbase * dt),
        velocity,
        steering_angle,
    };
    StepOutcome { state: next, saturated }
}

const DARE_TOLERANCE: f64 = 1e-12;
const DARE_MAX_ITERATIONS: usize = 10_000;

/// Solves `P = A'PA − A'PB (R + B'PB)⁻¹ B'PA + Q` by fixed-point iteration from `P₀ = Q`.
pub fn solve_dare(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>, DynamicsError> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.shape() != (b.ncols(), b.ncols()) {
        return Err(DynamicsError::Shape(format!(
            "A {:?}, B {:?}, Q {:?}, R {:?}",
            a.shape(),
            b.shape(),
            q.shape(),
            r.shape()
        )));
    }
    let at = a.transpose();
    let bt = b.transpose();
    let mut p = q.clone();
    for i in 0..DARE_MAX_ITERATIONS {
        let next = riccati_map(&p, a, &at, b, &bt, q, r)?;
        let delta = (&next - &p).norm();
        if !delta.is_finite() {
            return Err(DynamicsError::NoConvergence { iterations: i + 1, residual: f64::INFINITY });
        }
        p = next;
        if delta < DARE_TOLERANCE {
            return Ok(p);
        }
    }
    let residual = dare_residual(&p, a, b, q, r)?;
    Err(DynamicsError::NoConvergence { iterations: DARE_MAX_ITERATIONS, residual })
}

fn riccati_map(
    p: &DMatrix<f64>,
    a: &DMatrix<f64>,
    at: &DMatrix<f64>,
    b: &DMatrix<f64>,
    bt: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>, DynamicsError> {
    let s = r + bt * p * b;
    let s_inv = s.try_inverse().ok_or(DynamicsError::Singular)?;
    let atpb = at * p * b;
    let next = at * p * a - &atpb * s_inv * atpb.transpose() + q;
    Ok((&next + next.transpose()) * 0.5)
}

/// Frobenius norm of the Riccati equation residual at `p`.
pub fn dare_residual(p: &DMatrix<f64>, a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<f64, DynamicsError> {
    let mapped = riccati_map(p, a, &a.transpose(), b, &b.transpose(), q, r)?;
    Ok((mapped - p).norm())
}

/// `K = (R + B'PB)⁻¹ B'PA`.
pub fn lqr_gain(p: &DMatrix<f64>, a: &DMatrix<f64>, b: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>, DynamicsError> {
    let bt = b.transpose();
    let s = r + &bt * p * b;
    let s_inv = s.try_inverse().ok_or(DynamicsError::Singular)?;
    Ok(s_inv * bt * p * a)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    /// Proportional speed gain.
    pub speed_gain: f64,
    /// Weight of the reference acceleration in the speed reference (s).
    pub speed_lookahead: f64,
    /// Along-track position gain feeding the speed reference (1/s).
    pub station_gain: f64,
    pub lateral_weight: f64,
    pub heading_weight: f64,
    pub steering_weight: f64,
    pub min_linearization_speed: f64,
    pub max_scheduled_speed: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            speed_gain: 1.5,
            speed_lookahead: 1.0 / 1.5,
            station_gain: 1.0,
            lateral_weight: 1.0,
            heading_weight: 2.0,
            steering_weight: 8.0,
            min_linearization_speed: 1.0,
            max_scheduled_speed: 40.0,
        }
    }
}

/// Discrete lateral error model `[e_y, e_ψ]` with steering as input, at speed `v`.
pub fn lateral_system(v: f64, dt: f64, wheelbase: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let a = DMatrix::from_row_slice(2, 2, &[1.0, v * dt, 0.0, 1.0]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, v * dt / wheelbase]);
    (a, b)
}

/// Lateral LQR gains indexed by speed bucket.
#[derive(Debug, Clone, PartialEq)]
pub struct LqrGains {
    buckets: Vec<[f64; 2]>,
    min_speed: f64,
    speed_gain: f64,
}

impl LqrGains {
    pub fn compute(params: &VehicleParameters, cfg: &TrackerConfig, dt: f64) -> Result<Self, DynamicsError> {
        let q = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![cfg.lateral_weight, cfg.heading_weight]));
        let r = DMatrix::from_element(1, 1, cfg.steering_weight);
        let first = cfg.min_linearization_speed.ceil() as usize;
        let last = cfg.max_scheduled_speed.ceil() as usize;
        let mut buckets = Vec::with_capacity(last + 1);
        for v in 0..=last {
            let speed = (v.max(first)) as f64;
            let (a, b) = lateral_system(speed, dt, params.wheelbase);
            let p = solve_dare(&a, &b, &q, &r)?;
            let k = lqr_gain(&p, &a, &b, &r)?;
            buckets.push([k[(0, 0)], k[(0, 1)]]);
        }
        Ok(Self { buckets, min_speed: cfg.min_linearization_speed, speed_gain: cfg.speed_gain })
    }

    /// Gain row for the bucket containing `speed`.
    pub fn lateral(&self, speed: f64) -> [f64; 2] {
        let v = speed.abs().max(self.min_speed);
        let i = (v.round() as usize).min(self.buckets.len() - 1);
        self.buckets[i]
    }

    pub fn speed_gain(&self) -> f64 {
        self.speed_gain
    }
}

/// Instantaneous tracking target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingReference {
    pub pose: Pose2D,
    pub v_ref: f64,
    /// Path curvature for steering feedforward (1/m).
    pub curvature: f64,
}

/// One tracking step. Longitudinal `a = −k_v (v − v_ref)`; lateral
/// `δ_cmd = atan(L κ) − K e` with `e = [lateral offset, heading error]`
/// expressed in the reference frame. Outputs are clamped to the actuator limits.
pub fn lqr_track_step(
    state: &BicycleState,
    reference: &TrackingReference,
    gains: &LqrGains,
    params: &VehicleParameters,
    dt: f64,
) -> ControlInput {
    let acceleration = (-gains.speed_gain() * (state.velocity - reference.v_ref)).clamp(-params.max_acceleration, params.max_acceleration);
    let local = reference.pose.to_local(crate::geom::Point2::new(state.x, state.y));
    let e = Vector2::new(local.y, normalize_angle(state.heading - reference.pose.heading));
    let k = gains.lateral(state.velocity);
    let feedforward = if reference.curvature == 0.0 { 0.0 } else { (params.wheelbase * reference.curvature).atan() };
    let delta_cmd = (feedforward - (k[0] * e[0] + k[1] * e[1])).clamp(-params.max_steering, params.max_steering);
    let steering_rate = ((delta_cmd - state.steering_angle) / dt).clamp(-params.max_steering_rate, params.max_steering_rate);
    ControlInput { acceleration, steering_rate }
}

/// Continuous-time reference built from a trajectory by linear interpolation
/// of positions, headings (shortest angular path) and knot speeds.
#[derive(Debug, Clone)]
pub struct ReferencePath {
    start_time: f64,
    positions: Vec<(f64, f64)>,
    headings: Vec<f64>,
    speeds: Vec<f64>,
    curvatures: Vec<f64>,
}

impl ReferencePath {
    pub fn new(traj: &Trajectory) -> Self {
        let knots: Vec<Pose2D> = traj.knots().collect();
        let n = knots.len();
        let positions: Vec<(f64, f64)> = knots.iter().map(|p| (p.x, p.y)).collect();
        let mut headings = Vec::with_capacity(n);
        headings.push(knots[0].heading);
        for i in 1..n {
            let prev: f64 = headings[i - 1];
            headings.push(prev + normalize_angle(knots[i].heading - prev));
        }
        let dist = |i: usize, j: usize| (positions[i].0 - positions[j].0).hypot(positions[i].1 - positions[j].1);
        let dt = TRAJECTORY_INTERVAL;
        let speeds = (0..n)
            .map(|i| {
                if n == 1 {
                    0.0
                } else if i == 0 {
                    dist(1, 0) / dt
                } else if i == n - 1 {
                    dist(n - 1, n - 2) / dt
                } else {
                    dist(i + 1, i - 1) / (2.0 * dt)
                }
            })
            .collect();
        let curvatures = (0..n.saturating_sub(1))
            .map(|i| {
                let len = dist(i + 1, i);
                if len > 1e-3 {
                    (headings[i + 1] - headings[i]) / len
                } else {
                    0.0
                }
            })
            .collect();
        Self { start_time: traj.start_time, positions, headings, speeds, curvatures }
    }

    fn end_time(&self) -> f64 {
        self.start_time + (self.positions.len() - 1) as f64 * TRAJECTORY_INTERVAL
    }

    /// (segment, fraction) for absolute time `t`; `None` past the end.
    fn locate(&self, t: f64) -> Option<(usize, f64)> {
        let local = ((t - self.start_time) / TRAJECTORY_INTERVAL).max(0.0);
        let n = self.positions.len();
        if n < 2 {
            return None;
        }
        let i = local.floor() as usize;
        if i >= n - 1 {
            if local <= (n - 1) as f64 {
                return Some((n - 2, 1.0));
            }
            return None;
        }
        Some((i, local - i as f64))
    }

    fn last_direction(&self) -> f64 {
        let n = self.positions.len();
        if n >= 2 {
            let (a, b) = (self.positions[n - 2], self.positions[n - 1]);
            if (b.0 - a.0).hypot(b.1 - a.1) > 1e-6 {
                return (b.1 - a.1).atan2(b.0 - a.0);
            }
        }
        *self.headings.last().expect("non-empty")
    }

    /// Pose at absolute time `t`; extrapolated at constant speed and heading past the end.
    pub fn pose_at(&self, t: f64) -> Pose2D {
        match self.locate(t) {
            Some((i, f)) => {
                let (a, b) = (self.positions[i], self.positions[i + 1]);
                let h = self.headings[i] + f * (self.headings[i + 1] - self.headings[i]);
                Pose2D::new(a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1), h)
            }
            None => {
                let n = self.positions.len();
                let last = self.positions[n - 1];
                let v = self.speeds[n - 1];
                let extra = (t - self.end_time()).max(0.0) * v;
                let dir = self.last_direction();
                Pose2D::new(last.0 + extra * dir.cos(), last.1 + extra * dir.sin(), self.headings[n - 1])
            }
        }
    }

    pub fn speed_at(&self, t: f64) -> f64 {
        match self.locate(t) {
            Some((i, f)) => self.speeds[i] + f * (self.speeds[i + 1] - self.speeds[i]),
            None => *self.speeds.last().expect("non-empty"),
        }
    }

    /// Knot accelerations from speed differences, interpolated; zero past the end.
    pub fn acceleration_at(&self, t: f64) -> f64 {
        match self.locate(t) {
            Some((i, f)) => self.knot_acceleration(i) + f * (self.knot_acceleration(i + 1) - self.knot_acceleration(i)),
            None => 0.0,
        }
    }

    fn knot_acceleration(&self, i: usize) -> f64 {
        let last = self.speeds.len() - 1;
        let (a, b) = (i.saturating_sub(1), (i + 1).min(last));
        if b == a {
            return 0.0;
        }
        (self.speeds[b] - self.speeds[a]) / ((b - a) as f64 * TRAJECTORY_INTERVAL)
    }

    pub fn curvature_at(&self, t: f64) -> f64 {
        match self.locate(t) {
            Some((i, _)) => self.curvatures[i],
            None => 0.0,
        }
    }
}

/// Bundles vehicle parameters, controller settings and the gain table.
#[derive(Debug, Clone)]
pub struct Tracker {
    pub params: VehicleParameters,
    pub config: TrackerConfig,
    gains: LqrGains,
}

impl Tracker {
    pub fn new(params: VehicleParameters, config: TrackerConfig) -> Result<Self, DynamicsError> {
        let gains = LqrGains::compute(&params, &config, SIM_DT)?;
        Ok(Self { params, config, gains })
    }

    /// Shared tracker with the default vehicle and controller constants.
    pub fn standard() -> &'static Tracker {
        static TRACKER: OnceLock<Tracker> = OnceLock::new();
        TRACKER.get_or_init(|| {
            Tracker::new(VehicleParameters::default(), TrackerConfig::default()).expect("default LQR gains converge")
        })
    }

    pub fn gains(&self) -> &LqrGains {
        &self.gains
    }

    /// Reference target for a state at absolute time `t`.
    pub fn reference(&self, state: &BicycleState, path: &ReferencePath, t: f64) -> TrackingReference {
        let pose = path.pose_at(t);
        let along = pose.to_local(crate::geom::Point2::new(state.x, state.y)).x;
        let feedforward = path.speed_at(t) + self.config.speed_lookahead * path.acceleration_at(t);
        let v_ref = (feedforward - self.config.station_gain * along).max(0.0);
        TrackingReference { pose, v_ref, curvature: path.curvature_at(t) }
    }

    pub fn control(&self, state: &BicycleState, path: &ReferencePath, t: f64) -> ControlInput {
        let r = self.reference(state, path, t);
        lqr_track_step(state, &r, &self.gains, &self.params, SIM_DT)
    }

    pub fn step(&self, state: &BicycleState, control: ControlInput) -> BicycleState {
        bicycle_step(state, control, SIM_DT, &self.params).state
    }

    /// Tracks `path` from `start` for `ticks` steps beginning at absolute time `t0`.
    pub fn track(&self, start: BicycleState, path: &ReferencePath, t0: f64, ticks: usize) -> Vec<BicycleState> {
        let mut out = Vec::with_capacity(ticks + 1);
        out.push(start);
        let mut s = start;
        for k in 0..ticks {
            let u = self.control(&s, path, t0 + k as f64 * SIM_DT);
            s = self.step(&s, u);
            out.push(s);
        }
        out
    }
}

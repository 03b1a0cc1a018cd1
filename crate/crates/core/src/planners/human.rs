use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{parse_params, Observation, Planner, PlannerError, PlannerKind};
use crate::geom::{Point2, Polyline, Pose2D};
use crate::scene::{pose_count, Scene, Trajectory, SIM_DT, TRAJECTORY_INTERVAL};

/// Perturbation applied to the recorded human drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HumanNoise {
    /// Standard deviation of the smooth lateral offset (m).
    pub lateral_sigma: f64,
    /// Temporal lag in 0.1 s ticks.
    pub lag_ticks: u32,
    /// Multiplier on distance travelled along the human path.
    pub speed_scale: f64,
    /// Mixed into the per-scene seed.
    pub seed: u64,
}

impl Default for HumanNoise {
    fn default() -> Self {
        Self { lateral_sigma: 0.0, lag_ticks: 0, speed_scale: 1.0, seed: 0 }
    }
}

impl HumanNoise {
    pub fn is_zero(&self) -> bool {
        self.lateral_sigma == 0.0 && self.lag_ticks == 0 && self.speed_scale == 1.0
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.lateral_sigma.is_finite() && self.lateral_sigma >= 0.0) {
            return Err("lateral_sigma must be nonnegative".into());
        }
        if !(self.speed_scale.is_finite() && self.speed_scale > 0.0) {
            return Err("speed_scale must be positive".into());
        }
        Ok(())
    }
}

/// FNV-1a, used to derive a stable per-scene seed.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ *b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// The human path with its arc length as a function of time.
#[derive(Debug, Clone)]
struct HumanPath {
    scene_id: String,
    path: Option<Polyline>,
    sample_dt: f64,
    arc: Vec<f64>,
    initial_speed: f64,
    waves: [(f64, f64); 2],
}

impl HumanPath {
    fn new(scene: &Scene, noise: &HumanNoise) -> Self {
        let (sample_dt, points): (f64, Vec<Point2>) = match &scene.human_log {
            Some(log) => (SIM_DT, log.iter().map(|s| s.pose.position()).collect()),
            None => (TRAJECTORY_INTERVAL, scene.human_trajectory.knots().map(|p| p.position()).collect()),
        };
        let mut arc = Vec::with_capacity(points.len());
        arc.push(0.0);
        for w in points.windows(2) {
            arc.push(arc.last().copied().unwrap_or(0.0) + w[0].distance(w[1]));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(scene.scene_id.as_bytes()) ^ noise.seed);
        let mut wave = || (rng.gen_range(0.3..1.2), rng.gen_range(0.0..std::f64::consts::TAU));
        let waves = [wave(), wave()];
        Self {
            scene_id: scene.scene_id.clone(),
            path: Polyline::new_dedup(points).ok(),
            sample_dt,
            arc,
            initial_speed: scene.ego_init.velocity.max(0.0),
            waves,
        }
    }

    /// Expert arc length at time `t`, extrapolated with the final speed.
    fn expert_arc(&self, t: f64) -> f64 {
        let n = self.arc.len();
        if n < 2 {
            return 0.0;
        }
        let x = (t / self.sample_dt).max(0.0);
        let i = x.floor() as usize;
        if i >= n - 1 {
            let last_speed = (self.arc[n - 1] - self.arc[n - 2]) / self.sample_dt;
            return self.arc[n - 1] + (x - (n - 1) as f64) * self.sample_dt * last_speed;
        }
        self.arc[i] + (x - i as f64) * (self.arc[i + 1] - self.arc[i])
    }

    fn station(&self, t: f64, noise: &HumanNoise) -> f64 {
        let lag = noise.lag_ticks as f64 * SIM_DT;
        noise.speed_scale * (self.initial_speed * t.min(lag) + self.expert_arc((t - lag).max(0.0)))
    }

    fn lateral(&self, t: f64, sigma: f64) -> (f64, f64) {
        let k = sigma / std::f64::consts::SQRT_2;
        let mut offset = 0.0;
        let mut rate = 0.0;
        for (w, phi) in self.waves {
            offset += k * ((w * t + phi).sin() - phi.sin());
            rate += k * w * (w * t + phi).cos();
        }
        (offset, rate)
    }

    fn pose(&self, scene: &Scene, t: f64, noise: &HumanNoise) -> Pose2D {
        let Some(path) = &self.path else {
            return scene.ego_init.pose;
        };
        let s = self.station(t, noise);
        let base = path.pose_at_extended(s);
        let (offset, rate) = self.lateral(t, noise.lateral_sigma);
        let ds = (self.station(t + 0.05, noise) - self.station((t - 0.05).max(0.0), noise)) / (t + 0.05 - (t - 0.05).max(0.0));
        let n = Point2::new(-base.heading.sin(), base.heading.cos());
        let p = base.position() + n.scale(offset);
        Pose2D::new(p.x, p.y, base.heading + rate.atan2(ds.max(1.0)))
    }
}

/// Replays the recorded human drive with optional perturbations.
///
/// Plans are issued in chunks aligned to multiples of the horizon, so a
/// replanning loop keeps following one continuous reference.
#[derive(Debug, Clone)]
pub struct PerturbedHumanPlanner {
    name: String,
    noise: HumanNoise,
    cache: Option<HumanPath>,
}

impl PerturbedHumanPlanner {
    pub fn new(name: impl Into<String>, noise: HumanNoise) -> Self {
        Self { name: name.into(), noise, cache: None }
    }

    pub fn noise(&self) -> &HumanNoise {
        &self.noise
    }

    /// Plan for an explicit scene, independent of the observation's ego state.
    pub fn plan_for(&mut self, obs: &Observation, scene: &Scene) -> Trajectory {
        let chunk_ticks = ((obs.horizon / SIM_DT).round() as usize).max(1);
        let start_tick = obs.tick / chunk_ticks * chunk_ticks;
        let start = start_tick as f64 * SIM_DT;
        let n = pose_count(obs.horizon);
        let times = (1..=n).map(|k| start + k as f64 * TRAJECTORY_INTERVAL);
        if self.noise.is_zero() {
            let poses = times.map(|t| scene.human_pose_at(t)).collect();
            return Trajectory::new(start, scene.human_pose_at(start), poses);
        }
        if self.cache.as_ref().is_none_or(|c| c.scene_id != scene.scene_id) {
            self.cache = Some(HumanPath::new(scene, &self.noise));
        }
        let path = self.cache.as_ref().expect("cache filled above");
        let poses = times.map(|t| path.pose(scene, t, &self.noise)).collect();
        Trajectory::new(start, path.pose(scene, start, &self.noise), poses)
    }
}

impl Planner for PerturbedHumanPlanner {
    fn name(&self) -> &str {
        &self.name
    }

    fn kind(&self) -> PlannerKind {
        PlannerKind::PerturbedHuman
    }

    fn plan(&mut self, obs: &Observation) -> Trajectory {
        self.plan_for(obs, obs.scene)
    }

    fn clone_box(&self) -> Box<dyn Planner> {
        Box::new(self.clone())
    }
}

pub(super) fn build_perturbed_human(name: &str, params: &serde_json::Value) -> Result<Box<dyn Planner>, PlannerError> {
    let noise: HumanNoise = parse_params(name, params)?;
    noise.validate().map_err(|message| PlannerError::Params { name: name.to_string(), message })?;
    Ok(Box::new(PerturbedHumanPlanner::new(name, noise)))
}

pub(super) fn build_human_replay(name: &str, params: &serde_json::Value) -> Result<Box<dyn Planner>, PlannerError> {
    if !(params.is_null() || params.as_object().is_some_and(|m| m.is_empty())) {
        return Err(PlannerError::Params { name: name.to_string(), message: "human_replay takes no parameters".into() });
    }
    Ok(Box::new(PerturbedHumanPlanner::new(name, HumanNoise::default())))
}

//! Synthetic approach episodes and rated participant cohorts.
//!
//! An episode is a one-dimensional approach: the robot starts `route_length`
//! metres from the human and drives toward them under a trapezoidal speed
//! profile until it stops at `standoff`. Ratings are drawn by inverting the
//! likelihood's noise model around a ground-truth exponent.
//!
//! Every participant draws from its own ChaCha stream selected by its index,
//! so generating participants one by one or in parallel gives the same data.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{build_observation, Aggregation, Observation};
use crate::safety::{pow_clipped, Rho, SafetyParams, TrajectorySample, RHO_MAX, RHO_MIN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "AS")]
    AutonomousSlow,
    #[serde(rename = "AF")]
    AutonomousFast,
    #[serde(rename = "TO")]
    Teleop,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::AutonomousSlow, Mode::AutonomousFast, Mode::Teleop];

    pub fn code(self) -> &'static str {
        match self {
            Mode::AutonomousSlow => "AS",
            Mode::AutonomousFast => "AF",
            Mode::Teleop => "TO",
        }
    }

    /// Cruise speed, m/s.
    pub fn default_speed(self) -> f64 {
        match self {
            Mode::AutonomousSlow => 0.3,
            Mode::AutonomousFast => 0.75,
            Mode::Teleop => 0.5,
        }
    }

    /// Teleoperation is noisier: a human is on the sticks.
    pub fn default_jitter(self) -> f64 {
        match self {
            Mode::Teleop => 0.10,
            _ => 0.02,
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "BYS")]
    Bystander,
    #[serde(rename = "CAS")]
    Casualty,
}

impl Role {
    pub fn code(self) -> &'static str {
        match self {
            Role::Bystander => "BYS",
            Role::Casualty => "CAS",
        }
    }
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingMode {
    pub mode: Mode,
    /// Cruise speed, m/s.
    pub speed: f64,
}

impl From<Mode> for OperatingMode {
    fn from(mode: Mode) -> Self {
        OperatingMode {
            mode,
            speed: mode.default_speed(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    pub route_length: f64,
    pub mode: OperatingMode,
    /// Sampling period, s.
    pub dt: f64,
    /// Final distance from the human, m.
    pub standoff: f64,
    /// Standard deviation of the multiplicative speed noise.
    pub speed_jitter: f64,
    /// Ramp-up acceleration, m/s².
    pub accel: f64,
    /// Ramp-down deceleration, m/s².
    pub decel: f64,
}

impl EpisodeSpec {
    pub fn new(mode: Mode) -> Self {
        EpisodeSpec {
            route_length: 11.0,
            mode: mode.into(),
            dt: 0.1,
            standoff: 0.5,
            speed_jitter: mode.default_jitter(),
            accel: 1.0,
            decel: 1.0,
        }
    }

    pub fn without_jitter(mut self) -> Self {
        self.speed_jitter = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !(self.standoff.is_finite() && self.standoff >= 0.0 && self.route_length > self.standoff) {
            return Err(Error::Validation(format!(
                "need route_length > standoff >= 0, got {} and {}",
                self.route_length, self.standoff
            )));
        }
        if !positive(self.dt) {
            return Err(Error::Validation(format!("dt must be > 0, got {}", self.dt)));
        }
        if !positive(self.mode.speed) {
            return Err(Error::Validation(format!("speed must be > 0, got {}", self.mode.speed)));
        }
        if !(positive(self.accel) && positive(self.decel)) {
            return Err(Error::Validation("ramp accelerations must be > 0".into()));
        }
        if !(self.speed_jitter.is_finite() && self.speed_jitter >= 0.0) {
            return Err(Error::Validation(format!("speed jitter must be >= 0, got {}", self.speed_jitter)));
        }
        Ok(())
    }
}

/// Largest excursion of the speed noise factor from 1.
const JITTER_CAP: f64 = 0.45;
/// Step-to-step correlation of the speed noise.
const JITTER_CORRELATION: f64 = 0.9;

/// Simulates one approach. Velocities are backward differences of distance.
pub fn generate_episode(spec: &EpisodeSpec, seed: u64) -> Result<Vec<TrajectorySample>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let path = spec.route_length - spec.standoff;
    let cap = (3.0 * spec.speed_jitter).min(JITTER_CAP);
    let innovation = (1.0 - JITTER_CORRELATION * JITTER_CORRELATION).sqrt();

    let mut noise = if spec.speed_jitter > 0.0 {
        (spec.speed_jitter * rng.sample::<f64, _>(StandardNormal)).clamp(-cap, cap)
    } else {
        0.0
    };
    let mut travelled = 0.0;
    let mut speed = 0.0f64;
    let mut d_prev = spec.route_length;
    let mut samples = vec![TrajectorySample::new(0.0, spec.route_length, 0.0)];

    // Worst case: a full path at 5% of cruise speed.
    let max_steps = (20.0 * path / (spec.mode.speed * spec.dt)).ceil() as usize + 1000;
    let mut k = 0usize;
    while travelled < path {
        k += 1;
        if k > max_steps {
            return Err(Error::Validation("episode did not reach the standoff".into()));
        }
        if spec.speed_jitter > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            noise = (JITTER_CORRELATION * noise + innovation * spec.speed_jitter * z).clamp(-cap, cap);
        }
        let remaining = path - travelled;
        let cruise = spec.mode.speed * (1.0 + noise);
        speed = cruise
            .min(speed + spec.accel * spec.dt)
            .min((2.0 * spec.decel * remaining).sqrt())
            .max(0.0);
        travelled += (speed * spec.dt).min(remaining);
        if path - travelled < 1e-9 {
            travelled = path;
        }
        let d = if travelled >= path {
            spec.standoff
        } else {
            (spec.route_length - travelled).max(spec.standoff)
        };
        samples.push(TrajectorySample::new(k as f64 * spec.dt, d, (d_prev - d) / spec.dt));
        d_prev = d;
    }
    Ok(samples)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParticipant {
    pub id: String,
    pub role: Role,
    pub rho_star: Rho,
    /// Standard deviation of the additive rating noise, before quantization.
    pub rating_noise: f64,
    /// Snap ratings to the 5-point Likert grid.
    pub quantize: bool,
}

impl SyntheticParticipant {
    /// Rating for a segment with the given margin.
    pub fn rate<R: Rng + ?Sized>(&self, margin: f64, rng: &mut R) -> f64 {
        let eps = if self.rating_noise > 0.0 {
            self.rating_noise * rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        };
        let rating = (pow_clipped(margin, self.rho_star.get()) + eps).clamp(0.0, 1.0);
        if self.quantize {
            quantize_5(rating)
        } else {
            rating
        }
    }
}

/// Nearest point of `{0, 0.25, 0.5, 0.75, 1}`.
pub fn quantize_5(rating: f64) -> f64 {
    (rating * 4.0).round() / 4.0
}

/// Likert answer (1..=5) of a rating on the 5-point grid.
pub fn likert_5(rating: f64) -> u32 {
    (quantize_5(rating) * 4.0).round() as u32 + 1
}

/// Rates one episode: margin by `aggregation`, rating from the participant's
/// ground-truth exponent.
pub fn synth_rating(
    episode: &[TrajectorySample],
    participant: &SyntheticParticipant,
    aggregation: Aggregation,
    params: &SafetyParams,
    seed: u64,
) -> Result<Observation> {
    let mut obs = build_observation(episode, 0.0, aggregation, params, participant.id.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    obs.rating = participant.rate(obs.margin, &mut rng);
    Ok(obs)
}

/// Mean and standard deviation of a normal prior truncated to the rho bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhoPrior {
    pub mean: f64,
    pub sd: f64,
}

impl RhoPrior {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Rho {
        if self.sd == 0.0 {
            return Rho::clamped(self.mean);
        }
        let normal = Normal::new(self.mean, self.sd).expect("validated prior");
        for _ in 0..10_000 {
            let x = normal.sample(rng);
            if (RHO_MIN..=RHO_MAX).contains(&x) {
                return Rho::clamped(x);
            }
        }
        Rho::clamped(self.mean)
    }

    fn validate(&self) -> Result<()> {
        if !(self.mean.is_finite() && self.sd.is_finite() && self.sd >= 0.0) {
            return Err(Error::Validation(format!("invalid rho prior {self:?}")));
        }
        Ok(())
    }
}

/// Cohort design. Stand-off ranges are per role: casualties are approached
/// closely for boarding, bystanders watch the robot stop further away.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CohortSpec {
    pub n_bys: usize,
    pub n_cas: usize,
    pub cas_prior: RhoPrior,
    pub bys_prior: RhoPrior,
    pub rating_noise: f64,
    pub quantize: bool,
    pub aggregation: Aggregation,
    /// Uniform range of per-trial stand-off distances, m.
    pub cas_standoff: [f64; 2],
    pub bys_standoff: [f64; 2],
    pub route_length: f64,
    pub dt: f64,
    pub accel: f64,
    pub decel: f64,
    /// Rating item label written for every trial.
    pub item: String,
}

impl Default for CohortSpec {
    fn default() -> Self {
        CohortSpec {
            n_bys: 30,
            n_cas: 31,
            // Standard errors converted to standard deviations with sqrt(n).
            cas_prior: RhoPrior { mean: 0.29, sd: 0.28 },
            bys_prior: RhoPrior { mean: 0.97, sd: 0.93 },
            rating_noise: 0.05,
            quantize: false,
            aggregation: Aggregation::WorstCase,
            cas_standoff: [1.0, 1.4],
            bys_standoff: [3.2, 3.6],
            route_length: 11.0,
            dt: 0.1,
            accel: 1.0,
            decel: 1.0,
            item: DEFAULT_ITEM.to_string(),
        }
    }
}

/// Label of the approach-segment questionnaire item.
pub const DEFAULT_ITEM: &str = "Q3-approach";

impl CohortSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_bys + self.n_cas == 0 {
            return Err(Error::Validation("cohort needs at least one participant".into()));
        }
        self.cas_prior.validate()?;
        self.bys_prior.validate()?;
        if !(self.rating_noise.is_finite() && self.rating_noise >= 0.0) {
            return Err(Error::Validation(format!("rating noise must be >= 0, got {}", self.rating_noise)));
        }
        for [lo, hi] in [self.cas_standoff, self.bys_standoff] {
            if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi && hi < self.route_length) {
                return Err(Error::Validation(format!("invalid stand-off range [{lo}, {hi}]")));
            }
        }
        if self.item.is_empty() {
            return Err(Error::Validation("item label must not be empty".into()));
        }
        let mut probe = EpisodeSpec::new(Mode::AutonomousSlow);
        probe.route_length = self.route_length;
        probe.dt = self.dt;
        probe.accel = self.accel;
        probe.decel = self.decel;
        probe.standoff = self.cas_standoff[0];
        probe.validate()
    }

    fn standoff_range(&self, role: Role) -> [f64; 2] {
        match role {
            Role::Casualty => self.cas_standoff,
            Role::Bystander => self.bys_standoff,
        }
    }

    fn prior(&self, role: Role) -> RhoPrior {
        match role {
            Role::Casualty => self.cas_prior,
            Role::Bystander => self.bys_prior,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trial {
    /// Position in the participant's randomized sequence, 1-based.
    pub order: usize,
    pub mode: Mode,
    /// Repetition of this mode, 1 or 2.
    pub trial: u8,
    pub standoff: f64,
    pub samples: Vec<TrajectorySample>,
    pub observation: Observation,
    /// 5-point answer when ratings are quantized.
    pub likert: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticipantData {
    pub participant: SyntheticParticipant,
    pub trials: Vec<Trial>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortDataset {
    pub seed: u64,
    pub spec: CohortSpec,
    pub params: SafetyParams,
    pub participants: Vec<ParticipantData>,
}

/// Independent generator for participant number `index` of a cohort.
pub fn participant_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

/// Builds the full cohort: casualties first (`CAS-001`, ...), then bystanders.
pub fn generate_cohort(spec: &CohortSpec, params: &SafetyParams, seed: u64) -> Result<CohortDataset> {
    spec.validate()?;
    params.validate()?;
    let slots = (0..spec.n_cas)
        .map(|i| (Role::Casualty, i))
        .chain((0..spec.n_bys).map(|i| (Role::Bystander, i)));
    let participants = slots
        .enumerate()
        .map(|(index, (role, i))| generate_participant(spec, params, seed, index, role, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(CohortDataset {
        seed,
        spec: spec.clone(),
        params: *params,
        participants,
    })
}

fn generate_participant(
    spec: &CohortSpec,
    params: &SafetyParams,
    seed: u64,
    index: usize,
    role: Role,
    role_index: usize,
) -> Result<ParticipantData> {
    let mut rng = participant_rng(seed, index);
    let participant = SyntheticParticipant {
        id: format!("{}-{:03}", role.code(), role_index + 1),
        role,
        rho_star: spec.prior(role).sample(&mut rng),
        rating_noise: spec.rating_noise,
        quantize: spec.quantize,
    };

    // Two trials per mode in a random order.
    let mut sequence: Vec<Mode> = Mode::ALL.iter().flat_map(|&m| [m, m]).collect();
    sequence.shuffle(&mut rng);
    let [lo, hi] = spec.standoff_range(role);

    let mut seen = [0u8; 3];
    let mut trials = Vec::with_capacity(sequence.len());
    for (order, mode) in sequence.into_iter().enumerate() {
        let slot = Mode::ALL.iter().position(|&m| m == mode).unwrap();
        seen[slot] += 1;
        let trial = seen[slot];

        let standoff = if hi > lo { rng.random_range(lo..hi) } else { lo };
        let episode_spec = EpisodeSpec {
            route_length: spec.route_length,
            dt: spec.dt,
            standoff,
            accel: spec.accel,
            decel: spec.decel,
            ..EpisodeSpec::new(mode)
        };
        let samples = generate_episode(&episode_spec, rng.random())?;
        let mut observation = synth_rating(&samples, &participant, spec.aggregation, params, rng.random())?;
        observation.segment_id = segment_id(&participant.id, mode, trial);
        let likert = spec.quantize.then(|| likert_5(observation.rating));
        trials.push(Trial {
            order: order + 1,
            mode,
            trial,
            standoff,
            samples,
            observation,
            likert,
        });
    }
    Ok(ParticipantData { participant, trials })
}

pub fn segment_id(participant_id: &str, mode: Mode, trial: u8) -> String {
    format!("{participant_id}/{mode}/{trial}")
}

/// Participants rated directly on margins drawn uniformly from a range, with
/// no trajectories involved. Used to probe estimator accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationCohortSpec {
    pub n_participants: usize,
    pub rho_range: [f64; 2],
    pub n_obs: usize,
    pub margin_range: [f64; 2],
    pub rating_noise: f64,
    pub quantize: bool,
}

impl Default for ObservationCohortSpec {
    fn default() -> Self {
        ObservationCohortSpec {
            n_participants: 50,
            rho_range: [0.1, 2.5],
            n_obs: 12,
            margin_range: [0.1, 0.9],
            rating_noise: 0.05,
            quantize: false,
        }
    }
}

pub fn generate_observation_cohort(spec: &ObservationCohortSpec, seed: u64) -> Result<Vec<(Rho, Vec<Observation>)>> {
    let [rho_lo, rho_hi] = spec.rho_range;
    let [m_lo, m_hi] = spec.margin_range;
    Rho::new(rho_lo)?;
    Rho::new(rho_hi)?;
    if rho_lo > rho_hi || m_lo > m_hi || spec.n_obs == 0 {
        return Err(Error::Validation("invalid observation cohort spec".into()));
    }
    Ok((0..spec.n_participants)
        .map(|index| {
            let mut rng = participant_rng(seed, index);
            let participant = SyntheticParticipant {
                id: format!("P-{:03}", index + 1),
                role: Role::Bystander,
                rho_star: Rho::clamped(rng.random_range(rho_lo..=rho_hi)),
                rating_noise: spec.rating_noise,
                quantize: spec.quantize,
            };
            let obs = (0..spec.n_obs)
                .map(|k| {
                    let margin = rng.random_range(m_lo..=m_hi);
                    Observation {
                        margin,
                        rating: participant.rate(margin, &mut rng),
                        segment_id: format!("{}/{}", participant.id, k + 1),
                    }
                })
                .collect();
            (participant.rho_star, obs)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn slow_episode_without_jitter() {
        let spec = EpisodeSpec::new(Mode::AutonomousSlow).without_jitter();
        let ep = generate_episode(&spec, 1).unwrap();
        let first = ep.first().unwrap();
        let last = ep.last().unwrap();
        assert_eq!(first.d, 11.0);
        assert_eq!(last.d, 0.5);
        // Constant-speed estimate is 35 s; ramps add a fraction of a second.
        assert!((last.t - 35.0).abs() < 1.0, "duration {}", last.t);
        assert!(ep.iter().all(|s| s.d >= spec.standoff));
        assert!(ep.windows(2).all(|w| w[1].t > w[0].t && w[1].d <= w[0].d));
    }

    #[test]
    fn episodes_are_physically_sane() {
        for mode in Mode::ALL {
            for seed in 0..20 {
                let spec = EpisodeSpec::new(mode);
                let ep = generate_episode(&spec, seed).unwrap();
                assert!(ep.iter().all(|s| s.v.abs() <= 1.5 * spec.mode.speed + 1e-12));
                assert!(ep.iter().all(|s| s.d >= spec.standoff));
                assert!(ep.windows(2).all(|w| w[1].d <= w[0].d));
                assert_eq!(ep.last().unwrap().d, spec.standoff);
            }
        }
    }

    #[test]
    fn episode_is_deterministic() {
        let spec = EpisodeSpec::new(Mode::Teleop);
        assert_eq!(generate_episode(&spec, 9).unwrap(), generate_episode(&spec, 9).unwrap());
        assert_ne!(generate_episode(&spec, 9).unwrap(), generate_episode(&spec, 10).unwrap());
    }

    #[test]
    fn invalid_episode_specs() {
        let mut spec = EpisodeSpec::new(Mode::AutonomousFast);
        spec.standoff = 12.0;
        assert!(generate_episode(&spec, 0).is_err());
        let mut spec = EpisodeSpec::new(Mode::AutonomousFast);
        spec.dt = 0.0;
        assert!(generate_episode(&spec, 0).is_err());
    }

    fn person(rho: f64, quantize: bool) -> SyntheticParticipant {
        SyntheticParticipant {
            id: "P".into(),
            role: Role::Casualty,
            rho_star: Rho::new(rho).unwrap(),
            rating_noise: 0.0,
            quantize,
        }
    }

    #[test]
    fn noise_free_ratings() {
        let p = SafetyParams::default();
        let at_half = [TrajectorySample::new(0.0, p.d_min + 0.5 * (p.d_max - p.d_min), 0.0)];
        let o = synth_rating(&at_half, &person(2.0, false), Aggregation::WorstCase, &p, 3).unwrap();
        assert_abs_diff_eq!(o.rating, 0.25, epsilon = 1e-12);
        let o = synth_rating(&at_half, &person(1.0, true), Aggregation::WorstCase, &p, 3).unwrap();
        assert_eq!(o.rating, 0.5);
        assert_eq!(likert_5(o.rating), 3);
        assert!(synth_rating(&[], &person(1.0, true), Aggregation::WorstCase, &p, 3).is_err());
    }

    #[test]
    fn cohort_structure() {
        let spec = CohortSpec::default();
        let data = generate_cohort(&spec, &SafetyParams::default(), 7).unwrap();
        assert_eq!(data.participants.len(), 61);
        for pd in &data.participants {
            assert_eq!(pd.trials.len(), 6);
            for mode in Mode::ALL {
                let mut reps: Vec<u8> = pd.trials.iter().filter(|t| t.mode == mode).map(|t| t.trial).collect();
                reps.sort();
                assert_eq!(reps, vec![1, 2]);
            }
            let rho = pd.participant.rho_star.get();
            assert!((RHO_MIN..=RHO_MAX).contains(&rho));
            for t in &pd.trials {
                assert!(t.observation.is_informative(), "{} margin {}", t.observation.segment_id, t.observation.margin);
            }
        }
        let cas = data.participants.iter().filter(|p| p.participant.role == Role::Casualty).count();
        assert_eq!(cas, 31);
        assert_eq!(data, generate_cohort(&spec, &SafetyParams::default(), 7).unwrap());
        assert_ne!(data, generate_cohort(&spec, &SafetyParams::default(), 8).unwrap());
    }

    #[test]
    fn participants_do_not_depend_on_cohort_size() {
        let p = SafetyParams::default();
        let small = CohortSpec { n_cas: 3, n_bys: 0, ..CohortSpec::default() };
        let large = CohortSpec { n_cas: 5, n_bys: 4, ..CohortSpec::default() };
        let a = generate_cohort(&small, &p, 11).unwrap();
        let b = generate_cohort(&large, &p, 11).unwrap();
        assert_eq!(a.participants[..], b.participants[..3]);
    }

    #[test]
    fn empty_cohort_rejected() {
        let spec = CohortSpec { n_cas: 0, n_bys: 0, ..CohortSpec::default() };
        assert!(generate_cohort(&spec, &SafetyParams::default(), 1).is_err());
    }

    #[test]
    fn observation_cohort_is_reproducible() {
        let spec = ObservationCohortSpec::default();
        let a = generate_observation_cohort(&spec, 5).unwrap();
        assert_eq!(a.len(), 50);
        assert!(a.iter().all(|(r, o)| (0.1..=2.5).contains(&r.get()) && o.len() == 12));
        assert_eq!(a, generate_observation_cohort(&spec, 5).unwrap());
    }
}

use super::actions::grip_sequence;
use super::endpoints::register_object;
use super::{
    find_matching_oog, generate_observation_oog, grasp_heuristic, hand_changes, holds, identify_reference_object,
    identify_target_object, optimize_se3_sequence, relation_delta, rollout_end_pose_rgb, rollout_endpoints_rgbd,
    se3_from_pose_trajectory, ActionStep, DemoPoses, Grip, Observation, PlanMatch, PolicyConfig, PolicyError,
    PolicyState,
};
use crate::geom::{centroid, kabsch_align, pose, transform_point, Pose, Rotation, Vec3};
use crate::oog::{FeatureTrajectory, Oog, Plan, RelationSet};
use crate::register::RegistrationResult;
use crate::tracks::CaptureMode;
use crate::warp::{pose_warp, translation_warp};
use serde::{Deserialize, Serialize};

pub const TRACE_FORMAT: &str = "oog-trace";

/// Anything that can be observed and driven by end-effector actions.
pub trait Environment {
    fn observe(&mut self) -> Observation;
    fn execute(&mut self, actions: &[ActionStep]) -> ExecutionReport;
    /// Whether the sparse task reward would be 1 right now.
    fn goal_satisfied(&self) -> bool;
}

/// Failures noticed while executing a batch of actions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionReport {
    /// A close found nothing to grasp.
    pub missed_grasp: bool,
    /// A carried object was pushed more than a centimeter into the table.
    pub penetration: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutcomeClass {
    Success,
    MissedTracking,
    MissedGrasp,
    UnsatisfiedContact,
}

impl OutcomeClass {
    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeClass::Success => "success",
            OutcomeClass::MissedTracking => "missed-tracking",
            OutcomeClass::MissedGrasp => "missed-grasp",
            OutcomeClass::UnsatisfiedContact => "unsatisfied-contact",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub class: OutcomeClass,
    /// 1 iff `class` is success.
    pub reward: u8,
    /// Plan segments executed.
    pub steps: usize,
}

impl Outcome {
    pub fn new(class: OutcomeClass, steps: usize) -> Self {
        Self { class, reward: u8::from(class == OutcomeClass::Success), steps }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TraceRecord {
    Match {
        observed: Vec<String>,
        plan_index: Option<usize>,
        complete: bool,
    },
    Registration {
        object: String,
        role: String,
        #[serde(with = "crate::io::pose")]
        transform: Pose,
        fitness: f64,
        inliers: usize,
        correspondences: usize,
    },
    Warp {
        object: String,
        samples: usize,
        keypoints: usize,
    },
    Actions {
        steps: Vec<ActionStep>,
    },
    Execution(ExecutionReport),
    Failure {
        reason: String,
    },
}

/// Everything an episode did, in order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    pub outcome: Outcome,
}

impl Trace {
    pub fn to_json(&self) -> Vec<u8> {
        crate::io::to_json(TRACE_FORMAT, self)
    }

    /// All emitted actions in execution order.
    pub fn actions(&self) -> impl Iterator<Item = &ActionStep> {
        self.records.iter().flat_map(|r| match r {
            TraceRecord::Actions { steps } => steps.as_slice(),
            _ => &[],
        })
    }
}

fn relation_strings(set: &RelationSet) -> Vec<String> {
    set.iter().map(|r| r.to_string()).collect()
}

fn classify(e: &PolicyError) -> OutcomeClass {
    match e {
        PolicyError::MissingGraspData => OutcomeClass::MissedGrasp,
        _ => OutcomeClass::MissedTracking,
    }
}

/// Observe, match, synthesize and execute until the plan completes, the
/// state is not recognized, or the step budget runs out.
pub fn run_policy(plan: &Plan, env: &mut dyn Environment, cfg: &PolicyConfig) -> Result<Trace, PolicyError> {
    cfg.validate()?;
    let mut state = PolicyState::new(cfg.step_budget);
    let mut records = Vec::new();
    let mut steps = 0;
    let ids: Vec<&str> = plan.oogs[0].objects.iter().map(|o| o.id.as_str()).collect();
    let class = loop {
        let obs = env.observe();
        if let Some(missing) = ids.iter().find(|id| obs.object(id).is_none()) {
            records.push(TraceRecord::Failure { reason: PolicyError::MissingObject(missing.to_string()).to_string() });
            break OutcomeClass::MissedTracking;
        }
        let oog = match generate_observation_oog(&obs, plan.epsilon_contact) {
            Ok(g) => g,
            Err(e) => {
                records.push(TraceRecord::Failure { reason: e.to_string() });
                break classify(&e);
            }
        };
        let observed = relation_strings(&oog.relation_set());
        let l = match find_matching_oog(&oog, plan, &mut state) {
            Ok(PlanMatch::TaskComplete) => {
                records.push(TraceRecord::Match { observed, plan_index: Some(state.cursor), complete: true });
                break if env.goal_satisfied() { OutcomeClass::Success } else { OutcomeClass::UnsatisfiedContact };
            }
            Ok(PlanMatch::Segment(l)) => {
                records.push(TraceRecord::Match { observed, plan_index: Some(l), complete: false });
                l
            }
            Err(e) => {
                records.push(TraceRecord::Match { observed, plan_index: None, complete: false });
                records.push(TraceRecord::Failure { reason: e.to_string() });
                break classify(&e);
            }
        };
        if state.budget_remaining == 0 {
            records.push(TraceRecord::Failure { reason: "step budget exhausted".into() });
            break OutcomeClass::UnsatisfiedContact;
        }
        let aligned = obs.aligned();
        let segment = match synthesize_segment(plan, l, &aligned, cfg) {
            Ok(s) => s,
            Err(e) => {
                records.push(TraceRecord::Failure { reason: e.to_string() });
                break classify(&e);
            }
        };
        records.extend(segment.records);
        let back = obs.alignment().inverse();
        let actions: Vec<ActionStep> =
            segment.actions.iter().map(|a| ActionStep::new(back * a.end_effector, a.grip)).collect();
        records.push(TraceRecord::Actions { steps: actions.clone() });
        let report = env.execute(&actions);
        records.push(TraceRecord::Execution(report));
        state.budget_remaining -= 1;
        steps += 1;
        if report.missed_grasp {
            break OutcomeClass::MissedGrasp;
        }
        if report.penetration {
            break OutcomeClass::UnsatisfiedContact;
        }
    };
    Ok(Trace { records, outcome: Outcome::new(class, steps) })
}

/// Actions for one plan step, in the plane-aligned frame of `obs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub actions: Vec<ActionStep>,
    pub records: Vec<TraceRecord>,
}

/// Gripper pointing straight down.
fn top_down() -> Rotation {
    Rotation::from_axis_angle(&Vec3::x_axis(), std::f64::consts::PI)
}

fn lifted(p: &Pose, h: f64) -> Pose {
    pose(p.rotation, p.translation.vector + Vec3::new(0.0, 0.0, h))
}

struct Builder<'a> {
    plan: &'a Plan,
    obs: &'a Observation,
    cfg: &'a PolicyConfig,
    ee: Pose,
    held: Vec<String>,
    actions: Vec<ActionStep>,
    records: Vec<TraceRecord>,
}

impl Builder<'_> {
    fn record_registration(&mut self, object: &str, role: &str, r: &RegistrationResult) {
        self.records.push(TraceRecord::Registration {
            object: object.into(),
            role: role.into(),
            transform: r.transform,
            fitness: r.fitness,
            inliers: r.inlier_count,
            correspondences: r.correspondence_count,
        });
    }

    fn release(&mut self) {
        if self.held.is_empty() {
            return;
        }
        self.actions.push(ActionStep::new(self.ee, Grip::Open));
        self.ee = lifted(&self.ee, self.cfg.retreat_height);
        self.actions.push(ActionStep::new(self.ee, Grip::Open));
        self.held.clear();
    }

    fn grasp_at(&mut self, id: &str, at: Pose) {
        self.release();
        self.actions.push(ActionStep::new(lifted(&at, self.cfg.approach_height), Grip::Open));
        self.actions.extend(grip_sequence(&[at], Some(at), false));
        self.ee = at;
        self.held = vec![id.to_string()];
    }

    /// Grasp pose for `id`: the demonstrated fingertip centroid carried by
    /// the object's registration, or the top-down heuristic without depth.
    fn grasp_pose(&mut self, g0: &Oog, g1: &Oog, id: &str) -> Result<Pose, PolicyError> {
        if self.plan.mode == CaptureMode::Rgb {
            let seen = self.obs.object(id).ok_or_else(|| PolicyError::MissingObject(id.into()))?;
            return grasp_heuristic(&seen.cloud).ok_or_else(|| PolicyError::MissingObject(id.into()));
        }
        let demo = [g1, g0]
            .into_iter()
            .find(|g| g.grasp.grip_closed && !g.grasp.is_empty() && holds(&g.relation_set(), id))
            .ok_or(PolicyError::MissingGraspData)?;
        let points = demo.grasp.grasp_points.clone();
        let reg = register_object(g0, self.obs, id, &self.cfg.registration)?;
        self.record_registration(id, "grasp", &reg);
        let at = transform_point(&reg.transform, &centroid(&points).expect("non-empty grasp"));
        Ok(pose(reg.transform.rotation * top_down(), at))
    }

    fn ensure_held(&mut self, g0: &Oog, g1: &Oog, id: &str) -> Result<(), PolicyError> {
        if self.held.iter().any(|h| h == id) {
            return Ok(());
        }
        let at = self.grasp_pose(g0, g1, id)?;
        self.grasp_at(id, at);
        Ok(())
    }

    fn finish_transport(&mut self, path: &[Pose], release: bool) {
        self.actions.extend(grip_sequence(path, None, false));
        if let Some(last) = path.last() {
            self.ee = *last;
        }
        if release {
            self.release();
        }
    }

    fn transport_rgbd(&mut self, g0: &Oog, g1: &Oog) -> Result<(), PolicyError> {
        let target = identify_target_object(g0, g1, CaptureMode::Rgbd)?;
        let reference = identify_reference_object(g0, g1, &target)?;
        self.ensure_held(g0, g1, &target)?;
        let ep = rollout_endpoints_rgbd(g0, g1, self.obs, &target, &reference, &self.cfg.registration)?;
        self.record_registration(&target, "start", &ep.start);
        self.record_registration(&reference, "goal", &ep.goal);
        let warped =
            ep.keypoints.iter().map(|k| translation_warp(&k.demo, &k.start, &k.end)).collect::<Result<Vec<_>, _>>()?;
        self.records.push(TraceRecord::Warp {
            object: target.clone(),
            samples: warped.first().map_or(0, Vec::len),
            keypoints: warped.len(),
        });
        let steps = optimize_se3_sequence(&warped, &self.cfg.optimizer)?;
        let mut path = Vec::with_capacity(steps.len());
        let mut total = Pose::identity();
        let mut ee = self.ee;
        for t in &steps {
            ee = t * ee;
            total = t * total;
            path.push(ee);
        }
        if self.cfg.terminal_alignment {
            let predicted: Vec<Vec3> = ep.keypoints.iter().map(|k| transform_point(&total, &k.start)).collect();
            let goals: Vec<Vec3> = ep.keypoints.iter().map(|k| k.end).collect();
            if let (Ok(fit), Some(last)) = (kabsch_align(&predicted, &goals), path.last_mut()) {
                if !fit.degenerate {
                    *last = fit.pose * *last;
                }
            }
        }
        let release = !holds(&g1.relation_set(), &target);
        self.finish_transport(&path, release);
        Ok(())
    }

    fn transport_rgb(&mut self, g0: &Oog, g1: &Oog) -> Result<(), PolicyError> {
        let target = identify_target_object(g0, g1, CaptureMode::Rgb)?;
        let reference = identify_reference_object(g0, g1, &target)?;
        let tau = g0
            .points_of(&target)
            .find_map(|p| match &p.trajectory {
                FeatureTrajectory::Poses(v) if v.len() >= 2 => Some(v.clone()),
                _ => None,
            })
            .ok_or_else(|| PolicyError::MissingPose(target.clone()))?;
        let pose_of =
            |g: &Oog, id: &str| g.object(id).and_then(|o| o.pose).ok_or_else(|| PolicyError::MissingPose(id.into()));
        let demo = DemoPoses {
            target_start: tau[0],
            target_end: tau[tau.len() - 1],
            reference_start: pose_of(g0, &reference)?,
            reference_end: pose_of(g1, &reference)?,
        };
        let seen = |id: &str| {
            self.obs
                .object(id)
                .ok_or_else(|| PolicyError::MissingObject(id.into()))?
                .pose
                .ok_or_else(|| PolicyError::MissingPose(id.into()))
        };
        let (start, observed_ref) = (seen(&target)?, seen(&reference)?);
        let end = rollout_end_pose_rgb(&demo, &observed_ref, self.cfg.convention);
        let warped = pose_warp(&tau, &start, &end)?;
        self.records.push(TraceRecord::Warp { object: target.clone(), samples: warped.len(), keypoints: 1 });
        self.ensure_held(g0, g1, &target)?;
        let path = se3_from_pose_trajectory(&warped, &self.ee);
        let release = !holds(&g1.relation_set(), &target);
        self.finish_transport(&path[1..], release);
        Ok(())
    }
}

/// Actions that take the scene from `G_l` to `G_{l+1}`.
///
/// Steps that only change hand relations release and grasp; steps that
/// change object relations move the target along its warped demonstration
/// and release it when the hand no longer holds it at `G_{l+1}`.
pub fn synthesize_segment(
    plan: &Plan,
    l: usize,
    obs: &Observation,
    cfg: &PolicyConfig,
) -> Result<Segment, PolicyError> {
    let (g0, g1) = (&plan.oogs[l], &plan.oogs[l + 1]);
    // the observation matched G_l, so its hand relations are what we hold
    let held = g0
        .relation_set()
        .iter()
        .filter(|r| r.involves_hand())
        .filter_map(|r| r.0.as_object().map(str::to_owned))
        .collect();
    let mut b = Builder { plan, obs, cfg, ee: obs.end_effector, held, actions: Vec::new(), records: Vec::new() };
    let object_change = relation_delta(g0, g1).iter().any(|r| !r.involves_hand());
    if object_change {
        match plan.mode {
            CaptureMode::Rgbd => b.transport_rgbd(g0, g1)?,
            CaptureMode::Rgb => b.transport_rgb(g0, g1)?,
        }
    } else {
        let lost = hand_changes(g0, g1, false);
        let gained = hand_changes(g0, g1, true);
        if lost.is_empty() && gained.is_empty() {
            return Err(PolicyError::NoTarget);
        }
        if !lost.is_empty() {
            b.release();
        }
        for id in gained {
            let at = b.grasp_pose(g0, g1, &id)?;
            b.grasp_at(&id, at);
        }
    }
    Ok(Segment { actions: b.actions, records: b.records })
}

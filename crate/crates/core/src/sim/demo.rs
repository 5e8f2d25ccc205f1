//! Scripted demonstrations with known keyframes.
//!
//! A demonstration moves one object at a time along straight waypoint
//! legs at constant speed. The hand closes a few frames before an object
//! starts moving and opens a few frames after it stops, so the keyframes
//! sit exactly where the object starts and stops.

use super::goal::{GoalSpec, PosePredicate};
use super::layout::{Region, TaskTemplate};
use super::scene::{Attachment, SimConfig, SimObject, SimScene};
use super::shapes::{Shape, JUICE_SPOUT_TIP};
use crate::geom::{pose, slerp, transform_point, PointCloud, Pose, Rotation, Vec3};
use crate::io::{BundleHand, BundleObject, DemonstrationBundle, KeypointTrackRecord, PlaneSource};
use crate::oog::{ObjectType, Relation, DEFAULT_EPSILON_CONTACT};
use crate::spatial::SpatialIndex;
use crate::tracks::CaptureMode;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Object speed along a leg, meters per frame.
const SPEED: f64 = 0.01;
/// Path-length equivalent of one radian of rotation.
const RADIAN_LENGTH: f64 = 0.05;
const LEAD_FRAMES: usize = 8;
const GAP_FRAMES: usize = 10;
const GRIP_FRAMES: usize = 3;
const TAIL_FRAMES: usize = 8;
const HOVER: f64 = 0.1;
const KEYPOINTS_PER_OBJECT: usize = 8;
/// Scale of the reconstructed meshes in RGB bundles.
const MESH_SCALE: f64 = 0.37;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    /// Put the mug on the coaster.
    MugOnCoaster,
    /// Move the mug from one coaster to another.
    MugTransfer,
    /// Put the L-block and then the block on the plate.
    Rearrange,
    /// Only the first step of [`TaskKind::Rearrange`].
    RearrangeFirst,
    /// Tilt the juice box over the cup until the spout touches the rim.
    Pour,
}

impl TaskKind {
    pub const ALL: [TaskKind; 5] =
        [TaskKind::MugOnCoaster, TaskKind::MugTransfer, TaskKind::Rearrange, TaskKind::RearrangeFirst, TaskKind::Pour];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::MugOnCoaster => "mug-on-coaster",
            TaskKind::MugTransfer => "mug-transfer",
            TaskKind::Rearrange => "rearrange",
            TaskKind::RearrangeFirst => "rearrange-first",
            TaskKind::Pour => "pour",
        }
    }
}

impl std::str::FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| {
            format!("unknown task `{s}`; expected one of {}", TaskKind::ALL.map(|k| k.as_str()).join(", "))
        })
    }
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoOptions {
    pub mode: CaptureMode,
    /// Standard deviation of noise on clouds and tracks, meters.
    pub noise: f64,
    pub seed: u64,
}

impl Default for DemoOptions {
    fn default() -> Self {
        Self { mode: CaptureMode::Rgbd, noise: 0.0, seed: 0 }
    }
}

/// What the demonstration actually contained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub task: TaskKind,
    /// Frames where an object starts or stops moving, plus both ends.
    pub keyframes: Vec<usize>,
    /// Relation set at each keyframe.
    pub relations: Vec<Vec<Relation>>,
    /// Camera pose in the simulator world.
    #[serde(with = "crate::io::pose")]
    pub world_from_camera: Pose,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthesizedDemo {
    pub bundle: DemonstrationBundle,
    pub truth: GroundTruth,
    /// The demonstrated layout with the task's randomization regions.
    pub template: TaskTemplate,
}

struct Step {
    object: &'static str,
    /// Grasp location in the object frame; snapped to the nearest surface
    /// sample.
    grasp_hint: Vec3,
    /// World poses of the object after the current one.
    waypoints: Vec<Pose>,
    release: bool,
}

struct Script {
    objects: Vec<SimObject>,
    steps: Vec<Step>,
    goal: GoalSpec,
    regions: Vec<Region>,
    description: &'static str,
}

fn placed(x: f64, y: f64, z: f64, yaw: f64) -> Pose {
    pose(Rotation::from_axis_angle(&Vec3::z_axis(), yaw), Vec3::new(x, y, z))
}

fn raised(p: &Pose, dz: f64) -> Pose {
    pose(p.rotation, p.translation.vector + Vec3::new(0.0, 0.0, dz))
}

fn object(id: &str, name: &str, object_type: ObjectType, shape: Shape, pose: Pose) -> SimObject {
    SimObject { id: id.into(), name: name.into(), object_type, shape, pose }
}

/// Lift, carry level, and lower onto `end`.
fn carry(start: &Pose, end: &Pose, height: f64) -> Vec<Pose> {
    let top = start.translation.z.max(end.translation.z) + height;
    vec![
        pose(start.rotation, Vec3::new(start.translation.x, start.translation.y, top)),
        pose(end.rotation, Vec3::new(end.translation.x, end.translation.y, top)),
        *end,
    ]
}

const MUG_GRASP: Vec3 = Vec3::new(-0.04, 0.0, 0.09);
const LBLOCK_GRASP: Vec3 = Vec3::new(-0.025, 0.0, 0.09);
const BLOCK_GRASP: Vec3 = Vec3::new(0.0, 0.0, 0.05);
const BOX_GRASP: Vec3 = Vec3::new(-0.01, 0.0, 0.12);

fn script(kind: TaskKind) -> Script {
    match kind {
        TaskKind::MugOnCoaster => {
            let mug = placed(-0.15, -0.02, 0.0, 0.4);
            let coaster = placed(0.12, 0.06, 0.0, -0.3);
            let end = pose(mug.rotation, transform_point(&coaster, &Vec3::new(0.0, 0.0, 0.006)));
            Script {
                objects: vec![
                    object("mug", "mug", ObjectType::Manipulate, Shape::Mug, mug),
                    object("coaster", "coaster", ObjectType::Reference, Shape::Coaster, coaster),
                ],
                steps: vec![Step {
                    object: "mug",
                    grasp_hint: MUG_GRASP,
                    waypoints: carry(&mug, &end, 0.08),
                    release: true,
                }],
                goal: GoalSpec { relations: vec![Relation::objects("coaster", "mug")], predicates: vec![] },
                regions: vec![Region::square("mug", 0.05, 0.5), Region::square("coaster", 0.05, 0.5)],
                description: "put the mug on the coaster",
            }
        }
        TaskKind::MugTransfer => {
            let a = placed(-0.12, 0.0, 0.0, 0.2);
            let b = placed(0.14, 0.04, 0.0, -0.4);
            let mug =
                pose(Rotation::from_axis_angle(&Vec3::z_axis(), 1.0), transform_point(&a, &Vec3::new(0.0, 0.0, 0.006)));
            let end = pose(mug.rotation, transform_point(&b, &Vec3::new(0.0, 0.0, 0.006)));
            let mut region_a = Region::square("coaster-a", 0.04, 0.5);
            region_a.carry = vec!["mug".into()];
            Script {
                objects: vec![
                    object("mug", "mug", ObjectType::Manipulate, Shape::Mug, mug),
                    object("coaster-a", "coaster", ObjectType::Reference, Shape::Coaster, a),
                    object("coaster-b", "coaster", ObjectType::Reference, Shape::Coaster, b),
                ],
                steps: vec![Step {
                    object: "mug",
                    grasp_hint: MUG_GRASP,
                    waypoints: carry(&mug, &end, 0.08),
                    release: true,
                }],
                goal: GoalSpec { relations: vec![Relation::objects("coaster-b", "mug")], predicates: vec![] },
                regions: vec![region_a, Region::square("coaster-b", 0.04, 0.5)],
                description: "move the mug from one coaster to the other",
            }
        }
        TaskKind::Rearrange | TaskKind::RearrangeFirst => {
            let plate = placed(0.1, 0.0, 0.0, 0.2);
            let lblock = placed(-0.15, 0.1, 0.0, 0.3);
            let block = placed(-0.12, -0.12, 0.0, -0.5);
            // opposite corners, so noisy clouds of the two blocks never look in contact
            let on_plate = |x: f64, y: f64, yaw: f64| plate * placed(x, y, 0.012, yaw);
            let l_end = on_plate(-0.045, 0.04, 0.0);
            let b_end = on_plate(0.045, -0.04, -std::f64::consts::FRAC_PI_2);
            let mut steps = vec![Step {
                object: "lblock",
                grasp_hint: LBLOCK_GRASP,
                waypoints: carry(&lblock, &l_end, 0.08),
                release: true,
            }];
            let mut relations = vec![Relation::objects("lblock", "plate")];
            if kind == TaskKind::Rearrange {
                steps.push(Step {
                    object: "block",
                    grasp_hint: BLOCK_GRASP,
                    waypoints: carry(&block, &b_end, 0.1),
                    release: true,
                });
                relations.push(Relation::objects("block", "plate"));
            }
            Script {
                objects: vec![
                    object("lblock", "L-shaped block", ObjectType::Manipulate, Shape::LBlock, lblock),
                    object("block", "block", ObjectType::Manipulate, Shape::Block, block),
                    object("plate", "plate", ObjectType::Reference, Shape::Plate, plate),
                ],
                steps,
                goal: GoalSpec { relations, predicates: vec![] },
                regions: vec![
                    Region::square("lblock", 0.04, 0.4),
                    Region::square("block", 0.04, 0.4),
                    Region::square("plate", 0.04, 0.4),
                ],
                description: if kind == TaskKind::Rearrange {
                    "put the L-block and then the block on the plate"
                } else {
                    "put the L-block on the plate"
                },
            }
        }
        TaskKind::Pour => {
            let juice = placed(-0.12, -0.08, 0.0, 0.3);
            let cup = placed(0.1, 0.05, 0.0, 1.2);
            let end = pour_pose(&juice, &cup);
            let above = raised(&end, 0.08);
            let lifted = raised(&juice, 0.15);
            Script {
                objects: vec![
                    object("juice", "juice box", ObjectType::Manipulate, Shape::JuiceBox, juice),
                    object("cup", "cup", ObjectType::Reference, Shape::Cup, cup),
                ],
                steps: vec![Step {
                    object: "juice",
                    grasp_hint: BOX_GRASP,
                    waypoints: vec![lifted, above, end],
                    release: false,
                }],
                goal: GoalSpec {
                    relations: vec![Relation::objects("cup", "juice")],
                    predicates: vec![
                        PosePredicate::Tilt { object: "juice".into(), min_degrees: 45.0 },
                        PosePredicate::Over {
                            object: "juice".into(),
                            point: JUICE_SPOUT_TIP,
                            container: "cup".into(),
                            radius: 0.035,
                        },
                    ],
                },
                regions: vec![Region::square("juice", 0.04, 0.4), Region::square("cup", 0.04, 0.4)],
                description: "pour from the juice box into the cup",
            }
        }
    }
}

/// Juice box tilted 70 degrees toward the cup with the spout tip just
/// inside the near rim.
fn pour_pose(juice: &Pose, cup: &Pose) -> Pose {
    let c = cup.translation.vector;
    let d = c - juice.translation.vector;
    let heading = d.y.atan2(d.x);
    let dir = Vec3::new(heading.cos(), heading.sin(), 0.0);
    let r = Rotation::from_axis_angle(&Vec3::z_axis(), heading)
        * Rotation::from_axis_angle(&Vec3::y_axis(), 70f64.to_radians());
    let tip = Vec3::new(c.x, c.y, 0.083) - dir * 0.029;
    pose(r, tip - r * JUICE_SPOUT_TIP)
}

/// Per-frame object poses and hand state.
#[derive(Clone)]
struct Frame {
    poses: Vec<Pose>,
    tcp: Vec3,
    closed: bool,
    held: Option<usize>,
}

fn leg_length(a: &Pose, b: &Pose) -> f64 {
    (b.translation.vector - a.translation.vector).norm() + RADIAN_LENGTH * a.rotation.angle_to(&b.rotation)
}

/// Poses every `SPEED` along the legs from `start` through `waypoints`,
/// excluding `start` and ending exactly on the last waypoint.
fn sample_path(start: &Pose, waypoints: &[Pose]) -> Vec<Pose> {
    let legs: Vec<(Pose, Pose, f64)> =
        std::iter::once(start).chain(waypoints).zip(waypoints).map(|(a, b)| (*a, *b, leg_length(a, b))).collect();
    let total: f64 = legs.iter().map(|l| l.2).sum();
    let m = (total / SPEED).ceil().max(1.0) as usize;
    (1..=m)
        .map(|k| {
            let mut s = total * k as f64 / m as f64;
            for (n, (a, b, len)) in legs.iter().enumerate() {
                if s <= *len || n + 1 == legs.len() {
                    let u = if *len > 0.0 { (s / len).min(1.0) } else { 1.0 };
                    let t = a.translation.vector.lerp(&b.translation.vector, u);
                    return pose(slerp(&a.rotation, &b.rotation, u), t);
                }
                s -= len;
            }
            unreachable!("legs is non-empty")
        })
        .collect()
}

fn nearest_index(cloud: &PointCloud, p: &Vec3) -> usize {
    SpatialIndex::new(&cloud.points).nearest(p).map(|(i, _)| i).unwrap_or(0)
}

fn timeline(script: &Script) -> (Vec<Frame>, Vec<usize>) {
    let index = |id: &str| script.objects.iter().position(|o| o.id == id).expect("scripted object");
    let mut cur =
        Frame { poses: script.objects.iter().map(|o| o.pose).collect(), tcp: Vec3::zeros(), closed: false, held: None };
    let mut frames = Vec::new();
    let mut keys = vec![0];
    for (n, step) in script.steps.iter().enumerate() {
        let i = index(step.object);
        let model = script.objects[i].shape.model();
        let grasp = model.points[nearest_index(model, &step.grasp_hint)];
        let at = |p: &Pose| transform_point(p, &grasp);
        cur.tcp = at(&cur.poses[i]) + Vec3::new(0.0, 0.0, HOVER);
        (cur.closed, cur.held) = (false, None);
        frames.extend(std::iter::repeat_n(cur.clone(), if n == 0 { LEAD_FRAMES } else { GAP_FRAMES }));
        cur.tcp = at(&cur.poses[i]);
        (cur.closed, cur.held) = (true, Some(i));
        frames.extend(std::iter::repeat_n(cur.clone(), GRIP_FRAMES));
        keys.push(frames.len() - 1);
        for p in sample_path(&cur.poses[i], &step.waypoints) {
            cur.poses[i] = p;
            cur.tcp = at(&p);
            frames.push(cur.clone());
        }
        keys.push(frames.len() - 1);
        frames.extend(std::iter::repeat_n(cur.clone(), GRIP_FRAMES));
        if step.release {
            (cur.closed, cur.held) = (false, None);
            cur.tcp += Vec3::new(0.0, 0.0, HOVER);
        }
    }
    frames.extend(std::iter::repeat_n(cur, TAIL_FRAMES));
    keys.push(frames.len() - 1);
    (frames, keys)
}

/// The simulator state a frame depicts.
fn scene_at(objects: &[SimObject], f: &Frame) -> SimScene {
    let mut objects = objects.to_vec();
    for (o, p) in objects.iter_mut().zip(&f.poses) {
        o.pose = *p;
    }
    let end_effector = pose(Rotation::from_axis_angle(&Vec3::x_axis(), std::f64::consts::PI), f.tcp);
    let attached =
        f.held.map(|i| Attachment { object: objects[i].id.clone(), offset: end_effector.inverse() * objects[i].pose });
    SimScene { objects, end_effector, grip_closed: f.closed, attached }
}

/// Camera 70 cm above the table looking down at the workspace.
fn world_from_camera() -> Pose {
    let eye = Vec3::new(0.05, -0.65, 0.7);
    let z = (-eye).normalize();
    let x = z.cross(&Vec3::z()).normalize();
    let y = z.cross(&x);
    let r = nalgebra::Rotation3::from_matrix_unchecked(nalgebra::Matrix3::from_columns(&[x, y, z]));
    pose(Rotation::from_rotation_matrix(&r), eye)
}

/// Indices of `k` spread-out points, starting from the first.
fn farthest_points(cloud: &PointCloud, k: usize) -> Vec<usize> {
    let mut chosen = vec![0];
    let mut dist: Vec<f64> = cloud.points.iter().map(|p| (p - cloud.points[0]).norm()).collect();
    while chosen.len() < k.min(cloud.len()) {
        let next = dist.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap();
        chosen.push(next);
        for (d, p) in dist.iter_mut().zip(&cloud.points) {
            *d = d.min((p - cloud.points[next]).norm());
        }
    }
    chosen
}

/// Build a demonstration bundle, its ground truth, and a template whose
/// nominal layout is the demonstrated one.
pub fn synthesize_demo(kind: TaskKind, opts: &DemoOptions) -> SynthesizedDemo {
    let script = script(kind);
    let (frames, keyframes) = timeline(&script);
    let n = frames.len();
    let cam = world_from_camera();
    let to_cam = cam.inverse();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let normal = Normal::new(0.0, opts.noise.max(0.0)).expect("finite noise");
    let mut jitter = |p: Vec3| {
        if opts.noise > 0.0 {
            p + Vec3::new(normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng))
        } else {
            p
        }
    };

    let scenes: Vec<SimScene> = frames.iter().map(|f| scene_at(&script.objects, f)).collect();
    let objects = script
        .objects
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let model = o.shape.model();
            let at = |t: usize| to_cam * frames[t].poses[i];
            let mut b = BundleObject {
                id: o.id.clone(),
                name: o.name.clone(),
                object_type: o.object_type,
                cloud: None,
                snapshots: Vec::new(),
                tracks: Vec::new(),
                model_vertices: None,
                depth_cloud: None,
                poses: Vec::new(),
            };
            match opts.mode {
                CaptureMode::Rgbd => {
                    let first = at(0);
                    b.cloud = Some(PointCloud::new(
                        model.points.iter().map(|p| jitter(transform_point(&first, p))).collect(),
                    ));
                    b.tracks = farthest_points(model, KEYPOINTS_PER_OBJECT)
                        .into_iter()
                        .enumerate()
                        .map(|(k, m)| KeypointTrackRecord {
                            keypoint_id: (100 * i + k) as u32,
                            positions: (0..n).map(|t| jitter(transform_point(&at(t), &model.points[m]))).collect(),
                            visible: None,
                        })
                        .collect();
                }
                CaptureMode::Rgb => {
                    b.model_vertices = Some(model.scaled(MESH_SCALE));
                    b.depth_cloud = Some(model.clone());
                    b.poses = (0..n).map(at).collect();
                }
            }
            b
        })
        .collect();
    let hand = scenes
        .iter()
        .map(|s| {
            let h = s.observe(0.0, &mut ChaCha8Rng::seed_from_u64(0)).hand.expect("simulated hand");
            Some(BundleHand {
                fingertips: h.fingertips.iter().map(|p| transform_point(&to_cam, p)).collect(),
                closed: h.closed,
            })
        })
        .collect();
    let table: Vec<Vec3> = (-8..=8)
        .flat_map(|i| (-8..=8).map(move |j| Vec3::new(0.05 * i as f64, 0.05 * j as f64, 0.0)))
        .map(|p| transform_point(&to_cam, &jitter(p)))
        .collect();

    let bundle = DemonstrationBundle {
        mode: opts.mode,
        frame_count: n,
        description: Some(script.description.into()),
        epsilon_contact: Some(DEFAULT_EPSILON_CONTACT),
        plane: PlaneSource::TablePoints { points: table },
        objects,
        hand,
    };
    let truth = GroundTruth {
        task: kind,
        relations: keyframes
            .iter()
            .map(|&t| scenes[t].relations(DEFAULT_EPSILON_CONTACT).into_iter().collect())
            .collect(),
        keyframes,
        world_from_camera: cam,
    };
    let template = TaskTemplate {
        name: kind.as_str().into(),
        description: Some(script.description.into()),
        scene: SimScene::new(script.objects),
        goal: script.goal,
        regions: script.regions,
        clearance: 0.03,
        sim: SimConfig::default(),
    };
    SynthesizedDemo { bundle, truth, template }
}

use super::{
    contact, full_pairs, ContactEdge, FeatureTrajectory, GraspNode, NodeRef, ObjectNode, ObjectType, Oog, OogError,
    Plan, PointNode, RelationSet, DEFAULT_EPSILON_CONTACT,
};
use crate::geom::{
    backproject, fit_plane_ransac, kabsch_align, plane_alignment_transform, pose, remove_statistical_outliers,
    scale_factor, transform_point, DepthImage, Plane, PlaneFitConfig, PointCloud, Pose, Rotation, Vec3,
};
use crate::io::{validate_bundle, BundleObject, DemonstrationBundle, PlaneSource};
use crate::tracks::{discover_keyframes, CaptureMode, ChangepointConfig, KeypointTrack};
use serde::{Deserialize, Serialize};

/// One object as seen at a keyframe, in the camera frame.
#[derive(Clone, Debug)]
pub struct ObjectInput {
    pub id: String,
    pub name: String,
    pub object_type: ObjectType,
    pub cloud: PointCloud,
    pub model_vertices: Option<PointCloud>,
    pub pose: Option<Pose>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HandInput {
    pub fingertips: Vec<Vec3>,
    pub closed: bool,
}

/// Everything known about one keyframe before alignment.
#[derive(Clone, Debug)]
pub struct KeyframeInput {
    pub keyframe: usize,
    pub objects: Vec<ObjectInput>,
    pub hand: Option<HandInput>,
    /// Segment trajectories in the camera frame.
    pub points: Vec<PointNode>,
}

/// Align a keyframe to the table plane and compute its contact edges.
///
/// The hand touches an object only while it is closed and one of its
/// fingertips lies within `epsilon` of the object's cloud.
pub fn build_oog(input: &KeyframeInput, plane: &Plane, epsilon: f64) -> Result<Oog, OogError> {
    let t = plane_alignment_transform(plane);
    let objects: Vec<ObjectNode> = input
        .objects
        .iter()
        .map(|o| ObjectNode {
            id: o.id.clone(),
            name: o.name.clone(),
            object_type: o.object_type,
            cloud: o.cloud.transformed(&t),
            model_vertices: o.model_vertices.clone(),
            pose: o.pose.map(|p| t * p),
        })
        .collect();
    let hand = input.hand.as_ref().map(|h| HandInput {
        fingertips: h.fingertips.iter().map(|p| transform_point(&t, p)).collect(),
        closed: h.closed,
    });
    let points = input
        .points
        .iter()
        .map(|p| PointNode {
            parent: p.parent.clone(),
            keypoint_id: p.keypoint_id,
            trajectory: match &p.trajectory {
                FeatureTrajectory::Points(v) => {
                    FeatureTrajectory::Points(v.iter().map(|q| transform_point(&t, q)).collect())
                }
                FeatureTrajectory::Poses(v) => FeatureTrajectory::Poses(v.iter().map(|q| t * q).collect()),
            },
        })
        .collect();
    assemble(input.keyframe, objects, hand.as_ref(), points, epsilon)
}

/// Build an OOG from geometry that is already plane-aligned.
pub(crate) fn assemble(
    keyframe: usize,
    objects: Vec<ObjectNode>,
    hand: Option<&HandInput>,
    points: Vec<PointNode>,
    epsilon: f64,
) -> Result<Oog, OogError> {
    for p in &points {
        if !objects.iter().any(|o| o.id == p.parent) {
            return Err(OogError::MissingObject(p.parent.clone()));
        }
    }
    let fingertips = hand.map(|h| PointCloud::new(h.fingertips.clone()));
    let edges = full_pairs(objects.iter().map(|o| o.id.as_str()))
        .into_iter()
        .map(|r| {
            let cloud_of = |n: &NodeRef| n.as_object().and_then(|id| objects.iter().find(|o| o.id == id));
            let in_contact = match (&r.0, &r.1) {
                (NodeRef::Object(_), NodeRef::Hand) => match (hand, &fingertips, cloud_of(&r.0)) {
                    (Some(h), Some(f), Some(o)) => h.closed && contact(f, &o.cloud, epsilon),
                    _ => false,
                },
                _ => match (cloud_of(&r.0), cloud_of(&r.1)) {
                    (Some(a), Some(b)) => contact(&a.cloud, &b.cloud, epsilon),
                    _ => false,
                },
            };
            ContactEdge { a: r.0, b: r.1, contact: in_contact }
        })
        .collect();
    let grasp =
        hand.map(|h| GraspNode { grasp_points: h.fingertips.clone(), grip_closed: h.closed }).unwrap_or_default();
    Ok(Oog { keyframe, objects, grasp, points, edges })
}

/// Plan construction settings beyond what the bundle carries.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanBuildConfig {
    /// Overrides the bundle's contact threshold.
    pub epsilon_contact: Option<f64>,
    /// Treat the capture as this mode instead of the bundle's own.
    pub mode: Option<CaptureMode>,
    pub changepoint: ChangepointConfig,
    pub plane_fit: PlaneFitConfig,
}

/// Estimate the table plane in the camera frame.
pub fn estimate_plane(src: &PlaneSource, cfg: &PlaneFitConfig) -> Result<Plane, OogError> {
    Ok(match src {
        PlaneSource::Explicit { normal, d } => Plane::new(*normal, *d)?,
        PlaneSource::TablePoints { points } => fit_plane_ransac(&PointCloud::new(points.clone()), cfg)?,
        PlaneSource::Depth { intrinsics, depth, mask } => {
            let img = DepthImage { width: intrinsics.width, height: intrinsics.height, depth: depth.clone() };
            let all = vec![true; depth.len()];
            let cloud = backproject(&img, intrinsics, mask.as_deref().unwrap_or(&all))?;
            fit_plane_ransac(&cloud, cfg)?
        }
    })
}

/// Turn a demonstration into a keyframe plan.
pub fn build_plan(bundle: &DemonstrationBundle, cfg: &PlanBuildConfig) -> Result<Plan, OogError> {
    let mode = cfg.mode.unwrap_or(bundle.mode);
    if mode != bundle.mode {
        let mut b = bundle.clone();
        b.mode = mode;
        validate_bundle(&b).map_err(OogError::Invalid)?;
    } else {
        validate_bundle(bundle).map_err(OogError::Invalid)?;
    }
    let epsilon = cfg.epsilon_contact.or(bundle.epsilon_contact).unwrap_or(DEFAULT_EPSILON_CONTACT);
    let plane = estimate_plane(&bundle.plane, &cfg.plane_fit)?;
    let n = bundle.frame_count;

    let tracks: Vec<KeypointTrack> =
        bundle.objects.iter().flat_map(|o| o.tracks.iter().map(|t| t.to_track())).collect();
    let keyframes = if mode == CaptureMode::Rgb {
        discover_keyframes(&[], n, mode, &cfg.changepoint)?
    } else {
        discover_keyframes(&tracks, n, mode, &cfg.changepoint)?
    };

    let models: Vec<Option<PointCloud>> =
        bundle.objects.iter().map(|o| scaled_model(o, mode)).collect::<Result<_, _>>()?;
    let hand_at = |t: usize| -> Option<HandInput> {
        bundle.hand.get(t).cloned().flatten().map(|h| HandInput { fingertips: h.fingertips, closed: h.closed })
    };
    let inputs_at = |t: usize, points: Vec<PointNode>| KeyframeInput {
        keyframe: t,
        objects: bundle
            .objects
            .iter()
            .zip(&models)
            .map(|(o, m)| ObjectInput {
                id: o.id.clone(),
                name: o.name.clone(),
                object_type: o.object_type,
                cloud: match (mode, m) {
                    (CaptureMode::Rgb, Some(m)) => m.transformed(&o.poses[t]),
                    _ => cloud_at(o, t),
                },
                model_vertices: m.clone(),
                pose: (mode == CaptureMode::Rgb).then(|| o.poses[t]),
            })
            .collect(),
        hand: hand_at(t),
        points,
    };

    // relation sets first, so runs of identical sets can be merged
    let mut kept: Vec<(usize, RelationSet)> = Vec::new();
    for &t in &keyframes {
        let rel = build_oog(&inputs_at(t, Vec::new()), &plane, epsilon)?.relation_set();
        if kept.last().map(|(_, r)| r) != Some(&rel) {
            kept.push((t, rel));
        }
    }
    if kept.len() < 2 {
        return Err(OogError::NoRelationChange);
    }

    let mut oogs = Vec::with_capacity(kept.len());
    for (l, &(t, _)) in kept.iter().enumerate() {
        let end = kept.get(l + 1).map_or(t, |(next, _)| *next);
        let points = segment_points(bundle, mode, t, end);
        oogs.push(build_oog(&inputs_at(t, points), &plane, epsilon)?);
    }
    let plan = Plan { mode, epsilon_contact: epsilon, description: bundle.description.clone(), oogs };
    plan.validate()?;
    Ok(plan)
}

fn scaled_model(o: &BundleObject, mode: CaptureMode) -> Result<Option<PointCloud>, OogError> {
    if mode != CaptureMode::Rgb {
        return Ok(None);
    }
    let Some(v) = &o.model_vertices else {
        return Ok(None);
    };
    let s = match &o.depth_cloud {
        Some(d) => {
            let clean = if d.len() > 16 { remove_statistical_outliers(d, 16, 2.0)? } else { d.clone() };
            scale_factor(&clean, v)?
        }
        None => 1.0,
    };
    Ok(Some(v.scaled(s)))
}

/// Object cloud at frame `t`: the latest snapshot at or before `t` carried
/// forward by the rigid motion of the object's visible keypoints.
fn cloud_at(o: &BundleObject, t: usize) -> PointCloud {
    let base = o.snapshots.iter().filter(|s| s.frame <= t).max_by_key(|s| s.frame).map(|s| (s.frame, &s.cloud));
    let (from, cloud) = match (base, &o.cloud) {
        (Some(b), _) => b,
        (None, Some(c)) => (0, c),
        (None, None) => return PointCloud::default(),
    };
    if from == t {
        return cloud.clone();
    }
    let (src, dst): (Vec<Vec3>, Vec<Vec3>) = o
        .tracks
        .iter()
        .map(|r| r.to_track())
        .filter(|k| k.visible[from] && k.visible[t])
        .map(|k| (k.positions[from], k.positions[t]))
        .unzip();
    let motion = match kabsch_align(&src, &dst) {
        Ok(fit) if !fit.degenerate => fit.pose,
        _ if !src.is_empty() => {
            let shift = dst.iter().zip(&src).map(|(d, s)| d - s).sum::<Vec3>() / src.len() as f64;
            pose(Rotation::identity(), shift)
        }
        _ => Pose::identity(),
    };
    cloud.transformed(&motion)
}

fn segment_points(bundle: &DemonstrationBundle, mode: CaptureMode, start: usize, end: usize) -> Vec<PointNode> {
    let span = start..=end;
    match mode {
        CaptureMode::Rgbd => bundle
            .objects
            .iter()
            .flat_map(|o| {
                let span = span.clone();
                o.tracks.iter().map(move |r| PointNode {
                    parent: o.id.clone(),
                    keypoint_id: Some(r.keypoint_id),
                    trajectory: FeatureTrajectory::Points(r.positions[span.clone()].to_vec()),
                })
            })
            .collect(),
        CaptureMode::Rgb => bundle
            .objects
            .iter()
            .map(|o| PointNode {
                parent: o.id.clone(),
                keypoint_id: None,
                trajectory: FeatureTrajectory::Poses(o.poses[span.clone()].to_vec()),
            })
            .collect(),
    }
}

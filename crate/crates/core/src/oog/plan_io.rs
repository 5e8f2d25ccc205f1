use super::{OogError, Plan};
use crate::io::{from_json, to_json};

pub const PLAN_FORMAT: &str = "oog-plan";

pub fn serialize_plan(plan: &Plan) -> Vec<u8> {
    to_json(PLAN_FORMAT, plan)
}

/// Parse a plan file and re-check every plan invariant.
pub fn deserialize_plan(bytes: &[u8]) -> Result<Plan, OogError> {
    let plan: Plan = from_json(PLAN_FORMAT, bytes)?;
    plan.validate()?;
    Ok(plan)
}

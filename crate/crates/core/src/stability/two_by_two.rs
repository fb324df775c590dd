//! Two queues, two servers, queue 1 ahead of queue 2 on both servers.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::closed_form::OneByTwo;
use super::{PiSummary, StabilityError, StabilityVerdict, Status, VERDICT_TOL};
use crate::model::SystemParams;

/// Which structural inequality failed.
pub fn check_structure(params: &SystemParams) -> Result<(), StabilityError> {
    if params.num_queues() != 2 || params.num_servers() != 2 {
        return Err(StabilityError::Structure(format!(
            "need a 2x2 system, got {}x{}",
            params.num_queues(),
            params.num_servers()
        )));
    }
    let c = params.cost();
    let mu = |i, j| params.mu(i, j);
    if !(c[1] * mu(1, 0) < c[0] * mu(0, 0)) {
        return Err(StabilityError::Structure("c2 mu21 < c1 mu11 fails".into()));
    }
    if !(c[1] * mu(1, 1) < c[0] * mu(0, 1)) {
        return Err(StabilityError::Structure("c2 mu22 < c1 mu12 fails".into()));
    }
    if !(mu(0, 1) < mu(0, 0)) {
        return Err(StabilityError::Structure("mu12 < mu11 fails".into()));
    }
    Ok(())
}

/// `pi1(0) mu21 + pi1({0,1}) mu22` together with the queue-1 law.
pub fn two_by_two_threshold(params: &SystemParams) -> Result<(f64, OneByTwo), StabilityError> {
    check_structure(params)?;
    let q1 = OneByTwo::new(params.lambda()[0], params.mu(0, 0), params.mu(0, 1))?;
    let thr = q1.pi0 * params.mu(1, 0) + (q1.pi0 + q1.pi1) * params.mu(1, 1);
    Ok((thr, q1))
}

pub fn classify_2x2(params: &SystemParams) -> Result<StabilityVerdict, StabilityError> {
    check_structure(params)?;
    let l = params.lambda();
    let cap1 = params.mu(0, 0) + params.mu(0, 1);
    let m1 = cap1 - l[0];
    if m1 <= VERDICT_TOL {
        let status = if m1 < -VERDICT_TOL { Status::Unstable } else { Status::Boundary };
        return Ok(StabilityVerdict {
            status,
            per_level_margins: vec![m1],
            diagnostics: vec![format!("queue 1 alone is not stable: lambda1 = {} vs {}", l[0], cap1)],
            ..StabilityVerdict::empty()
        });
    }
    let (thr, q1) = two_by_two_threshold(params)?;
    let m2 = thr - l[1];
    let status = if m2 > VERDICT_TOL {
        Status::GeometricallyErgodic
    } else if m2 < -VERDICT_TOL {
        Status::Unstable
    } else {
        Status::Boundary
    };
    Ok(StabilityVerdict {
        status,
        per_level_margins: vec![m1, m2],
        pi_summaries: vec![PiSummary {
            queues: vec![0],
            pi_zero: q1.pi0,
            pi_le_one: q1.pi0 + q1.pi1,
            bounds: Vec::new(),
            residual_mass: 0.0,
        }],
        diagnostics: vec![format!("queue 2 threshold {thr}")],
        ..StabilityVerdict::empty()
    })
}

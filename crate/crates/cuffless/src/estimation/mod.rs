//! BP estimate acquisition and calibration.
//!
//! Conversions between SBP/DBP and MAP/PP, basal-BP computation, the
//! alpha-blend calibration, the zero-change baseline, trained baselines
//! (regression tree and AdaBoost.R2), and the chat-completions endpoint
//! client.

mod adaboost;
mod baseline;
mod endpoint;
mod tree;

pub use adaboost::{AdaBoostParams, AdaBoostR2};
pub use baseline::{
    design_matrix, load_baseline, predict_baseline, save_baseline, train_baseline, BaselineHyper,
    BaselineKind, PredictedReading, TrainedBaseline,
};
pub use endpoint::{estimate_via_endpoint, ChatClient, EndpointConfig};
pub use tree::{RegressionTree, TreeParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A systolic/diastolic pair in mmHg, with `sbp > dbp > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BPReading {
    pub sbp_mmhg: f64,
    pub dbp_mmhg: f64,
}

impl BPReading {
    pub fn new(sbp_mmhg: f64, dbp_mmhg: f64) -> Result<Self> {
        if !(sbp_mmhg.is_finite() && dbp_mmhg.is_finite())
            || sbp_mmhg <= dbp_mmhg
            || dbp_mmhg <= 0.0
        {
            return Err(Error::InvalidReading {
                sbp: sbp_mmhg,
                dbp: dbp_mmhg,
            });
        }
        Ok(Self { sbp_mmhg, dbp_mmhg })
    }
}

/// A subject's calibration anchor: the mean of their day-D readings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasalBP {
    pub base_sbp_mmhg: f64,
    pub base_dbp_mmhg: f64,
    pub n_day_d: usize,
}

/// MAP = (SBP + 2 DBP) / 3, PP = SBP - DBP.
pub fn map_pp_from_reading(r: &BPReading) -> (f64, f64) {
    (
        (r.sbp_mmhg + 2.0 * r.dbp_mmhg) / 3.0,
        r.sbp_mmhg - r.dbp_mmhg,
    )
}

/// SBP = MAP + 2 PP / 3, DBP = MAP - PP / 3.
pub fn reading_from_map_pp(map: f64, pp: f64) -> Result<BPReading> {
    if !(map.is_finite() && pp.is_finite()) || pp <= 0.0 {
        return Err(Error::InvalidMapPp {
            map,
            pp,
            message: "pulse pressure must be positive and finite".to_owned(),
        });
    }
    let sbp = map + 2.0 * pp / 3.0;
    let dbp = map - pp / 3.0;
    if dbp <= 0.0 {
        return Err(Error::InvalidMapPp {
            map,
            pp,
            message: format!("implied dbp {dbp} is not positive"),
        });
    }
    Ok(BPReading {
        sbp_mmhg: sbp,
        dbp_mmhg: dbp,
    })
}

/// Component-wise mean of a subject's day-D readings.
pub fn compute_basal(day_d_readings: &[BPReading]) -> Result<BasalBP> {
    if day_d_readings.is_empty() {
        return Err(Error::EmptyReadings);
    }
    let n = day_d_readings.len() as f64;
    Ok(BasalBP {
        base_sbp_mmhg: day_d_readings.iter().map(|r| r.sbp_mmhg).sum::<f64>() / n,
        base_dbp_mmhg: day_d_readings.iter().map(|r| r.dbp_mmhg).sum::<f64>() / n,
        n_day_d: day_d_readings.len(),
    })
}

/// Blend a free-running estimate with the basal anchor:
/// `cal = free * alpha + basal * (1 - alpha)` per component.
pub fn calibrate(free: &BPReading, base: &BasalBP, alpha: f64) -> Result<BPReading> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    Ok(BPReading {
        sbp_mmhg: free.sbp_mmhg * alpha + base.base_sbp_mmhg * (1.0 - alpha),
        dbp_mmhg: free.dbp_mmhg * alpha + base.base_dbp_mmhg * (1.0 - alpha),
    })
}

/// The zero-change baseline: always the basal reading.
pub fn zero_baseline(base: &BasalBP) -> BPReading {
    BPReading {
        sbp_mmhg: base.base_sbp_mmhg,
        dbp_mmhg: base.base_dbp_mmhg,
    }
}

//! Experiment configuration.

use std::path::PathBuf;

use ruinwalk_core::mc::RunConfig;
use ruinwalk_core::models::{BgRegime, ModelKind, ProcessModel};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which scaled exceedance time is compared with its limit law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// a τ^rw / e(x) against G.
    TauRw,
    /// τ / e(x) against the law of μW/a.
    Tau,
}

/// Two-sample comparison with crude conditioning at the smallest level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub n_paths: u64,
    pub ks_max: f64,
}

/// The property an experiment verifies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Check {
    /// p̂/asymptote in `band` at the largest level, approaching 1 across the
    /// grid with at most `max_inversions` steps away from it.
    Asymptote {
        band: [f64; 2],
        max_inversions: usize,
    },
    /// KS trend of a scaled exceedance time against its limit.
    TauLimit {
        statistic: Statistic,
        ks_threshold: f64,
        /// Also verify domination, tail equivalence and light cycles.
        #[serde(default)]
        conditions: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cross_check: Option<CrossCheck>,
    },
    /// Joint law of the scaled quadruple at the largest level.
    Quadruple {
        grid: Vec<f64>,
        joint_tol: f64,
        q3_max: f64,
        corr_min: f64,
    },
    /// τ^rw = τ̂^rw with high conditional probability, plus the asymptote.
    Agreement {
        min_fraction: f64,
        ratio_band: [f64; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ks_threshold: Option<f64>,
    },
    /// τ = T_pre + t_in_cycle with T_pre ≈ μ τ̂ and a short final piece.
    Decomposition {
        min_agree: f64,
        mean_rel_tol: f64,
        median_max: f64,
    },
    /// Björk-Grandell with heavy cycle lengths: slope of p̂/F̄ and the two
    /// candidate laws of τ/x.
    BgHeavyLength {
        slope_rel_tol: f64,
        ks_threshold: f64,
    },
    /// Fluid model: the τ/e(x) trend must fail while the final
    /// up-slope stays of order e(x).
    Fluid {
        ks_threshold: f64,
        median_floor: f64,
    },
    /// Feasibility of the growth bound for a discrete power law and φ(x) = x^β.
    GrowthBound {
        alpha: f64,
        beta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cutoff: Option<u64>,
    },
    /// Rate construction: τ ≥ φ(x) on most big-jump hits.
    Construction { min_fraction: f64 },
}

impl Check {
    pub fn name(&self) -> &'static str {
        match self {
            Check::Asymptote { .. } => "asymptote",
            Check::TauLimit { .. } => "tau_limit",
            Check::Quadruple { .. } => "quadruple",
            Check::Agreement { .. } => "agreement",
            Check::Decomposition { .. } => "decomposition",
            Check::BgHeavyLength { .. } => "bg_heavy_length",
            Check::Fluid { .. } => "fluid",
            Check::GrowthBound { .. } => "growth_bound",
            Check::Construction { .. } => "construction",
        }
    }

    fn needs_model(&self) -> bool {
        !matches!(self, Check::GrowthBound { .. })
    }

    fn needs_trend(&self) -> bool {
        matches!(
            self,
            Check::Asymptote { .. }
                | Check::TauLimit { .. }
                | Check::Fluid { .. }
                | Check::BgHeavyLength { .. }
        ) || matches!(
            self,
            Check::Agreement {
                ks_threshold: Some(_),
                ..
            }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    #[default]
    Pass,
    Fail,
}

impl From<bool> for Verdict {
    fn from(pass: bool) -> Self {
        if pass {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Documented wall-clock budget on one core.
    #[serde(default)]
    pub budget: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ProcessModel>,
    #[serde(default)]
    pub x_grid: Vec<f64>,
    pub run: RunConfig,
    /// Hits per level for conditional samples.
    #[serde(default)]
    pub target_hits: usize,
    pub check: Check,
    #[serde(default)]
    pub expect: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

fn positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

fn need(errs: &mut Vec<String>, ok: bool, msg: &str) {
    if !ok {
        errs.push(msg.to_string());
    }
}

fn fraction(v: f64) -> bool {
    v > 0.0 && v <= 1.0
}

impl ExperimentSpec {
    /// Lists every violated field.
    pub fn validate(&self) -> Result<()> {
        let mut errs: Vec<String> = Vec::new();
        need(&mut errs, !self.name.is_empty(), "name: must not be empty");
        need(
            &mut errs,
            self.name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_'),
            "name: only ASCII letters, digits, '-' and '_' are allowed",
        );
        if let Err(e) = self.run.validate() {
            errs.push(format!("run: {e}"));
        }
        let check = &self.check;
        if check.needs_model() {
            if self.x_grid.is_empty() {
                errs.push("x_grid: must not be empty".into());
            }
            if self.x_grid.iter().any(|x| !positive(*x)) {
                errs.push("x_grid: levels must be finite and positive".into());
            }
            if self
                .x_grid
                .windows(2)
                .any(|w| w[1].partial_cmp(&w[0]) != Some(core::cmp::Ordering::Greater))
            {
                errs.push("x_grid: must be strictly increasing".into());
            }
            if check.needs_trend() && self.x_grid.len() < 3 {
                errs.push("x_grid: a trend check needs at least 3 levels".into());
            }
            if self.model.is_none() {
                errs.push("model: required for this check".into());
            }
            if !matches!(check, Check::Asymptote { .. }) && self.target_hits == 0 {
                errs.push("target_hits: must be at least 1".into());
            }
        }
        let kind = self.model.as_ref().map(|m| m.kind());
        match check {
            Check::Asymptote { band, .. } => need(
                &mut errs,
                positive(band[0]) && band[1] > band[0] && band[1].is_finite(),
                "check.band: need 0 < lo < hi",
            ),
            Check::TauLimit {
                ks_threshold,
                cross_check,
                ..
            } => {
                need(
                    &mut errs,
                    fraction(*ks_threshold),
                    "check.ks_threshold: must be in (0, 1]",
                );
                if let Some(c) = cross_check {
                    need(
                        &mut errs,
                        c.n_paths >= 1,
                        "check.cross_check.n_paths: must be at least 1",
                    );
                    need(
                        &mut errs,
                        fraction(c.ks_max),
                        "check.cross_check.ks_max: must be in (0, 1]",
                    );
                }
            }
            Check::Quadruple {
                grid,
                joint_tol,
                q3_max,
                corr_min,
            } => {
                need(
                    &mut errs,
                    !grid.is_empty() && grid.iter().all(|u| positive(*u)),
                    "check.grid: need positive points",
                );
                need(
                    &mut errs,
                    fraction(*joint_tol),
                    "check.joint_tol: must be in (0, 1]",
                );
                need(
                    &mut errs,
                    positive(*q3_max),
                    "check.q3_max: must be positive",
                );
                need(
                    &mut errs,
                    fraction(*corr_min),
                    "check.corr_min: must be in (0, 1]",
                );
            }
            Check::Agreement {
                min_fraction,
                ratio_band,
                ks_threshold,
            } => {
                need(
                    &mut errs,
                    fraction(*min_fraction),
                    "check.min_fraction: must be in (0, 1]",
                );
                need(
                    &mut errs,
                    positive(ratio_band[0])
                        && ratio_band[1] > ratio_band[0]
                        && ratio_band[1].is_finite(),
                    "check.ratio_band: need 0 < lo < hi",
                );
                if let Some(t) = ks_threshold {
                    need(
                        &mut errs,
                        fraction(*t),
                        "check.ks_threshold: must be in (0, 1]",
                    );
                }
            }
            Check::Decomposition {
                min_agree,
                mean_rel_tol,
                median_max,
            } => {
                need(
                    &mut errs,
                    fraction(*min_agree),
                    "check.min_agree: must be in (0, 1]",
                );
                need(
                    &mut errs,
                    positive(*mean_rel_tol),
                    "check.mean_rel_tol: must be positive",
                );
                need(
                    &mut errs,
                    positive(*median_max),
                    "check.median_max: must be positive",
                );
            }
            Check::BgHeavyLength {
                slope_rel_tol,
                ks_threshold,
            } => {
                need(
                    &mut errs,
                    positive(*slope_rel_tol),
                    "check.slope_rel_tol: must be positive",
                );
                need(
                    &mut errs,
                    fraction(*ks_threshold),
                    "check.ks_threshold: must be in (0, 1]",
                );
                if let Some(k) = kind {
                    need(
                        &mut errs,
                        matches!(k, ModelKind::BjorkGrandell(b) if b.regime == BgRegime::HeavyLength),
                        "model: needs a heavy_length bjork_grandell model",
                    );
                }
            }
            Check::Fluid {
                ks_threshold,
                median_floor,
            } => {
                need(
                    &mut errs,
                    fraction(*ks_threshold),
                    "check.ks_threshold: must be in (0, 1]",
                );
                need(
                    &mut errs,
                    positive(*median_floor),
                    "check.median_floor: must be positive",
                );
                if let Some(k) = kind {
                    need(
                        &mut errs,
                        matches!(k, ModelKind::FluidTwoStage { .. }),
                        "model: needs a fluid_two_stage model",
                    );
                }
            }
            Check::GrowthBound {
                alpha,
                beta,
                cutoff,
            } => {
                need(
                    &mut errs,
                    *alpha > 1.0 && alpha.is_finite(),
                    "check.alpha: must exceed 1",
                );
                need(&mut errs, positive(*beta), "check.beta: must be positive");
                need(
                    &mut errs,
                    cutoff.is_none_or(|c| c >= 1000),
                    "check.cutoff: must be at least 1000",
                );
            }
            Check::Construction { min_fraction } => {
                need(
                    &mut errs,
                    fraction(*min_fraction),
                    "check.min_fraction: must be in (0, 1]",
                );
                if let Some(k) = kind {
                    need(
                        &mut errs,
                        matches!(k, ModelKind::RateConstruction(_)),
                        "model: needs a rate_construction model",
                    );
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        Ok(spec)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

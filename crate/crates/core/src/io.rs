//! JSON model and premium documents.
//!
//! A model is either a generic affine document (`{"d", "m", "A", "b", "Sigma",
//! "alpha", "beta", "x0", "intensity_P", "intensity_Q", "rate"}`) or a flat
//! Heston jump-to-default object (`{"k", "vhat", ...}`); the presence of `"d"`
//! tells them apart.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::affine::{AffineModelParams, SpecAffine};
use crate::credit::PricingContext;
use crate::error::{Error, Result};
use crate::heston::{HestonJtdParams, HestonPremium};
use crate::linalg::Matrix;
use crate::measures::RiskPremiumSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineDocument {
    #[serde(flatten)]
    pub params: AffineModelParams,
    #[serde(rename = "intensity_P")]
    pub intensity_p: SpecAffine,
    /// Risk-neutral intensity; the premium's `lambdaQ` takes precedence.
    #[serde(rename = "intensity_Q", default, skip_serializing_if = "Option::is_none")]
    pub intensity_q: Option<SpecAffine>,
    pub rate: SpecAffine,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ModelDocument {
    Affine(AffineDocument),
    Heston(HestonJtdParams),
}

impl ModelDocument {
    pub fn from_value(v: Value) -> Result<Self> {
        let generic = v.get("d").is_some();
        Ok(if generic {
            ModelDocument::Affine(serde_json::from_value(v)?)
        } else {
            ModelDocument::Heston(serde_json::from_value(v)?)
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_value(serde_json::from_str(text)?)
    }

    pub fn dim(&self) -> usize {
        match self {
            ModelDocument::Affine(a) => a.params.d,
            ModelDocument::Heston(_) => 3,
        }
    }
}

/// Generic premium; `lambdaQ` may come from the model document instead.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffinePremium {
    pub thetahat: Vec<f64>,
    #[serde(rename = "Theta")]
    pub theta: Matrix,
    #[serde(rename = "lambdaQ", default, skip_serializing_if = "Option::is_none")]
    pub lambda_q: Option<SpecAffine>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum PremiumDocument {
    Affine(AffinePremium),
    Heston(HestonPremium),
}

impl PremiumDocument {
    pub fn from_value(v: Value) -> Result<Self> {
        let generic = v.get("thetahat").is_some();
        Ok(if generic {
            PremiumDocument::Affine(serde_json::from_value(v)?)
        } else {
            PremiumDocument::Heston(serde_json::from_value(v)?)
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_value(serde_json::from_str(text)?)
    }
}

/// Zero Heston premium keeping the physical intensity.
pub fn heston_zero_premium(h: &HestonJtdParams) -> HestonPremium {
    HestonPremium {
        theta1hat: 0.0,
        theta2hat: 0.0,
        theta11: 0.0,
        theta22: 0.0,
        lambda_q: h.lambda_p,
    }
}

/// Validated pricing context. Without a premium, `P` and `Q` dynamics coincide
/// and the risk-neutral intensity is `intensity_Q` or else `intensity_P`.
pub fn build_context(model: &ModelDocument, premium: Option<&PremiumDocument>) -> Result<PricingContext> {
    match (model, premium) {
        (ModelDocument::Heston(h), None) => PricingContext::heston(h, &heston_zero_premium(h)),
        (ModelDocument::Heston(h), Some(PremiumDocument::Heston(p))) => PricingContext::heston(h, p),
        _ => {
            let (params, lp, rate, spec) = affine_view(model, premium)?;
            PricingContext::new(params, lp, &spec, rate)
        }
    }
}

/// Generic parameters, physical intensity, rate and premium of a model and
/// an optional premium document, with the same defaults as [`build_context`].
pub fn affine_view(
    model: &ModelDocument,
    premium: Option<&PremiumDocument>,
) -> Result<(AffineModelParams, SpecAffine, SpecAffine, RiskPremiumSpec)> {
    match (model, premium) {
        (ModelDocument::Heston(h), p) => {
            let hp = match p {
                None => heston_zero_premium(h),
                Some(PremiumDocument::Heston(hp)) => hp.clone(),
                Some(PremiumDocument::Affine(_)) => {
                    return Err(Error::invalid("a generic premium needs a generic model document"))
                }
            };
            let (params, lp, rate) = h.to_affine()?;
            Ok((params, lp, rate, hp.to_spec(h)?))
        }
        (ModelDocument::Affine(doc), p) => {
            doc.params.check_structure()?;
            let spec = match p {
                None => {
                    let mut spec = RiskPremiumSpec::zero(&doc.intensity_p);
                    if let Some(q) = &doc.intensity_q {
                        spec.lambda_q = q.clone();
                    }
                    spec
                }
                Some(PremiumDocument::Affine(ap)) => RiskPremiumSpec {
                    thetahat: ap.thetahat.clone(),
                    theta: ap.theta.clone(),
                    lambda_q: ap
                        .lambda_q
                        .clone()
                        .or_else(|| doc.intensity_q.clone())
                        .ok_or_else(|| Error::invalid("no lambdaQ in the premium and no intensity_Q in the model"))?,
                },
                Some(PremiumDocument::Heston(_)) => {
                    return Err(Error::invalid("a Heston premium needs a Heston model document"))
                }
            };
            Ok((doc.params.clone(), doc.intensity_p.clone(), doc.rate.clone(), spec))
        }
    }
}

/// Generic document equivalent to a Heston model.
pub fn heston_as_affine(h: &HestonJtdParams, premium: &HestonPremium) -> Result<(AffineDocument, AffinePremium)> {
    let (params, intensity_p, rate) = h.to_affine()?;
    let spec = premium.to_spec(h)?;
    Ok((
        AffineDocument {
            params,
            intensity_p,
            intensity_q: Some(spec.lambda_q.clone()),
            rate,
        },
        AffinePremium {
            thetahat: spec.thetahat,
            theta: spec.theta,
            lambda_q: Some(spec.lambda_q),
        },
    ))
}

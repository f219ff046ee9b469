//! The interaction engine: run an evaluator session against a black box for
//! up to r rounds and record the verdict.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::random::{RandomSource, ROLE_BOX, ROLE_EVALUATOR, TAG_ROLE};
use crate::types::{
    CapabilityRef, CodecPair, Model, Query, Response, ResourceLedger, SessionStep, Transcript,
    Verdict,
};

/// Run one full interaction. The evaluator's coins and the box's coins come
/// from disjoint child streams of `src`, so neither side can influence the
/// other's randomness.
///
/// Errors with [`Error::SessionOverrun`] if the session tries to ask more
/// queries than the evaluator declared, and propagates any failure of the
/// black box.
pub fn run_interaction(
    e: &dyn crate::types::Evaluator,
    black_box: &dyn Model,
    src: &RandomSource,
    ledger: &mut ResourceLedger,
) -> Result<(Verdict, Transcript)> {
    let mut eval_rng = src.child(TAG_ROLE, ROLE_EVALUATOR).rng();
    let mut box_rng = src.child(TAG_ROLE, ROLE_BOX).rng();
    let declared = e.max_rounds();
    ledger.note_rounds(declared);

    let mut session = e.session();
    let mut transcript = Transcript::default();
    black_box.begin_session()?;
    loop {
        match session.next(&transcript, &mut eval_rng)? {
            SessionStep::Ask(x) => {
                if transcript.len() as u32 >= declared {
                    return Err(Error::SessionOverrun {
                        declared,
                        emitted: declared + 1,
                    });
                }
                let y = black_box.respond(&x, &mut box_rng)?;
                ledger.model_queries += 1;
                transcript.push(x, y);
            }
            SessionStep::Decide(verdict) => {
                black_box.end_session()?;
                ledger.interactions += 1;
                return Ok((verdict, transcript));
            }
        }
    }
}

/// A capability played as a black box: answers each query with a fresh draw
/// from the conditional response distribution.
pub struct CapabilitySampler {
    capability: CapabilityRef,
}

impl CapabilitySampler {
    pub fn new(capability: CapabilityRef) -> Self {
        CapabilitySampler { capability }
    }

    pub fn codec(&self) -> CodecPair {
        self.capability.codec()
    }
}

impl Model for CapabilitySampler {
    fn name(&self) -> String {
        format!("oracle:{}", self.capability.name())
    }

    fn respond(&self, x: &Query, rng: &mut crate::random::StreamRng) -> Result<Response> {
        self.capability.conditional_sample(x, rng)
    }

    fn is_deterministic(&self) -> bool {
        self.capability.is_deterministic()
    }

    fn response_distribution(&self, x: &Query) -> Option<Vec<(Response, f64)>> {
        self.capability.conditional_distribution(x)
    }
}

/// Wrap a capability as the ground-truth arm of a distinction run.
pub fn capability_as_blackbox(mu: CapabilityRef) -> Arc<CapabilitySampler> {
    Arc::new(CapabilitySampler::new(mu))
}

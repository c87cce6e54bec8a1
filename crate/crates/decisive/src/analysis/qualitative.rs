use crate::abstraction::{build_abstraction, to_finite_sts};
use crate::shs::{cycle_reset_witness, longest_nonstrong_path, HybridSystem, TargetSpec};

use super::{AbstractionStats, AnalysisError, Diagnostics, ReachReport, Verdict};

/// Decides qualitative reachability of a target set.
///
/// The system must be cycle-reset (the decisiveness precondition for the
/// abstraction route); otherwise the call refuses with a witness cycle
/// rather than risk an unsound verdict. On the finite abstraction:
///
/// - verdict `Zero` iff no abstract path leads from the initial support to
///   a target block (positive reachability is preserved and reflected);
/// - verdict `AlmostSure` iff the avoid-set of the target blocks is
///   unreachable from every initial-support block (almost-sure
///   reachability on finite chains, transferred by decisiveness plus
///   soundness of the abstraction);
/// - `PositiveNotAlmostSure` otherwise.
pub fn decide_qualitative(
    h: &HybridSystem,
    target: &TargetSpec,
    max_iter: usize,
) -> Result<ReachReport, AnalysisError> {
    if let Some(witness) = cycle_reset_witness(h) {
        return Err(AnalysisError::NotCycleReset { witness });
    }
    let abs = build_abstraction(h, target, max_iter)?;
    let chain = to_finite_sts(&abs)?;

    let can_reach_target = chain.backward_reach(&abs.target_blocks);
    let positive = abs
        .initial_support
        .iter()
        .any(|&b| can_reach_target[b]);

    let verdict = if !positive {
        Verdict::Zero
    } else {
        let avoid = chain.avoid_set(&abs.target_blocks);
        let can_reach_avoid = chain.backward_reach(&avoid);
        if abs.initial_support.iter().all(|&b| !can_reach_avoid[b]) {
            Verdict::AlmostSure
        } else {
            Verdict::PositiveNotAlmostSure
        }
    };

    Ok(ReachReport {
        verdict,
        prob_interval: None,
        diagnostics: Diagnostics {
            cycle_reset: true,
            witness_cycle: None,
            abstraction: Some(AbstractionStats {
                blocks: abs.blocks.len(),
                iterations: abs.iterations,
            }),
            quadrature: None,
            simulation: None,
            segment_bound: longest_nonstrong_path(h),
        },
    })
}

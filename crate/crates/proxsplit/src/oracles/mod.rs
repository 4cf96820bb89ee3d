//! Exact proximal operators and subgradient oracles, self-checking via the
//! prox optimality inclusion and firm nonexpansiveness.

mod functions;
mod sets;

pub use functions::{
    check_optimality_inclusion, prox_indicator, prox_l1, subgrad_l1, subgrad_l1_residual,
    subgrad_max_affine, AssumptionConstants, FlatteningEnvelope, IndicatorSet, L1Residual,
    MaxAffine, NonnegL1, ProxOracle, ScaledL1, SubgradOracle, SumOfDistances, ZeroFn,
};
pub use sets::{membership_tol, ConvexSetSpec};

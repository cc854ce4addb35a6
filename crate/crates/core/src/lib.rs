//! Discrete factor-graph Gibbs sampling toolkit.
//!
//! Builds discrete factor graphs with exact small-model oracles, runs
//! sequential, simulated-asynchronous and lock-free parallel Gibbs
//! samplers over them, computes total influence and variation distances,
//! evaluates closed-form bias/mixing bounds, and estimates mixing times
//! empirically through monotone couplings.
//!
//! ```
//! use gibbs_core::{
//!     build_bias_example, run_sequential, tv_distance, RngStream, SampleSink, State,
//! };
//!
//! // two binary variables with one near-forbidden joint state
//! let graph = build_bias_example();
//! let exact = graph.exact_distribution()?;
//!
//! // 200k sequential Gibbs updates, histogram after burn-in
//! let out = run_sequential(
//!     &graph,
//!     200_000,
//!     &State::new(vec![1, 1]),
//!     RngStream::new(42, 0),
//!     &SampleSink::joint(1_000),
//! )?;
//! let tv = tv_distance(&out.histogram().to_table(), &exact)?;
//! assert!(tv < 0.01, "sequential Gibbs tracks the exact distribution");
//! # Ok::<(), gibbs_core::Error>(())
//! ```

pub mod bounds;
pub mod coupling;
pub mod delay;
pub mod dist;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod history;
pub mod influence;
pub mod modelfile;
pub mod models;
pub mod rng;
pub mod sampler;
pub mod sink;
pub mod stats;

pub use bounds::{
    bound_general_bias_estimation, bound_hog_sparse_estimation, bound_hogwild_bias,
    bound_mixing, bound_seq_sparse_estimation, BoundInputs, MixingVariant,
};
pub use coupling::{
    estimate_mixing_time, maximal_coupling_sample, run_monotone_coupling_ising, tau_sweep,
    CouplingConfig, CouplingRun, MixingEstimate, SweepRow,
};
pub use delay::{DelayKind, DelayModel};
pub use dist::{sparse_variation_distance, tv_distance, JointTable};
pub use error::{Error, Result};
pub use graph::{
    Factor, FactorGraph, FactorKind, State, Value, VariableSpec, DEFAULT_ENUM_CAP,
};
pub use influence::{
    ising_influence_bound, total_influence_exact, InfluenceMethod, InfluenceReport,
};
pub use models::{
    build_badmix_model, build_bias_example, build_maxent_delay, build_random_ising,
    MaxEntDelaySpec,
};
pub use rng::RngStream;
pub use sampler::{
    run_hogwild_parallel, run_hogwild_simulated, run_multimodel, run_sequential, ParallelRun,
};
pub use sink::{EmpiricalDistribution, EventSpec, SampleSink, SinkMode, SinkOutput};

//! Analysis of polarization-correlation coincidence experiments against
//! quantum mechanics and restricted local hidden-variable (LHV) families.
//!
//! * [`data`]: angles modulo π, coincidence datasets, CSV I/O, the
//!   reference table, and the efficiency context that names a family.
//! * [`fit`]: the cosine-law fit `R(φ) = ⟨R⟩[1 + V cos(2φ + ψ)]`, the
//!   discrete visibility, and the `V_B/V_A` visibility-pair test.
//! * [`inequality`]: the deviation statistic `Δ_exp`, the two ε solvers,
//!   the two forms of the bound `D(η)`, the deviation profile of the
//!   closest LHV2 model, and the assembled verdict.
//! * [`lhvmodel`]: models given by a hidden-angle density and a detection
//!   function, validated and evaluated by quadrature.
//! * [`montecarlo`]: seeded, scheduling-independent event simulation.
//!
//! ```
//! use lhvbell::prelude::*;
//!
//! let data = builtin_reference_dataset();
//! let fit = fit_cosine(&data, &[], Weighting::Uniform).unwrap();
//! assert!((fit.visibility - 0.9897).abs() < 5e-4);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod angle;
pub mod data;
pub mod fit;
pub mod inequality;
pub mod lhvmodel;
pub mod montecarlo;
pub mod quadrature;
pub mod roots;

pub mod prelude {
    pub use crate::angle::{fold_angle, Angle};
    pub use crate::data::{
        builtin_reference_dataset, load_dataset, CoincidenceDataset, DataPoint, DatasetFormat, EfficiencyContext,
        Family,
    };
    pub use crate::fit::{
        eta_overall, fit_cosine, mean_rate, predict_rate, visibility_discrete, visibility_pair, CosineFit,
        VisibilityPair, Weighting,
    };
    pub use crate::inequality::{
        d_eta_approx, d_eta_lower_bound, delta_exp, deviation_profile, epsilon_approx, epsilon_exact,
        predicted_model_rate, run_inequality_test, v_effective, DeviationProfile, EpsilonMethod, EpsilonSolution,
        InequalityConfig, InequalityReport, Verdict,
    };
    pub use crate::lhvmodel::{
        coincidence_probability, model_dataset, quantum_dataset, single_probability, uniform_grid, validate_model,
        Density, Detection, Lhv4Density, LhvModel, ModelFile, ModelSpec,
    };
    pub use crate::montecarlo::{sample_hidden_pair, simulate, simulate_quantum, Noise, SimulationConfig};
}

// The guide under book/ is compiled here so its snippets run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/angles-and-data.md")]
    mod angles_and_data {}
    #[doc = include_str!("../../../book/src/cosine-fit.md")]
    mod cosine_fit {}
    #[doc = include_str!("../../../book/src/inequality.md")]
    mod inequality {}
    #[doc = include_str!("../../../book/src/deviation-profile.md")]
    mod deviation_profile {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
}

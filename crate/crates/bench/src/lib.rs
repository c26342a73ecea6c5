//! Fixtures shared by the criterion benches.

use higarrote::datasets::bundle;
use higarrote::garrote::working_estimate;
use higarrote::{
    build_model_matrix, center_response, fit_hyperparams, heredity_constraints, m_grid, CenteredResponse, DesignTable,
    Garrote, GarroteOptions, GridRange, Hyperparams, Likelihood,
};

/// A bundled design as used by `higarrote reproduce`, with its options.
pub fn dataset(id: &str) -> (DesignTable, GarroteOptions) {
    let b = bundle(id).expect("bundled dataset");
    (b.reproduction_design().expect("valid design"), b.options())
}

pub struct LikelihoodFixture {
    pub likelihood: Likelihood,
    pub lambda: f64,
    pub rho: Vec<f64>,
}

/// Likelihood of a bundled dataset at a mid-box point.
pub fn likelihood(id: &str) -> LikelihoodFixture {
    let (d, _) = dataset(id);
    let y = center_response(&d).expect("non-constant response");
    LikelihoodFixture {
        likelihood: Likelihood::new(&d, &y).expect("likelihood"),
        lambda: 0.2,
        rho: vec![0.5; d.n_rho()],
    }
}

pub struct PathFixture {
    pub garrote: Garrote,
    pub grid: Vec<f64>,
    pub hyper: Hyperparams,
    pub response: CenteredResponse,
}

/// Garrote ready to trace its budget path, at fitted hyperparameters.
pub fn path(id: &str) -> PathFixture {
    let (d, opts) = dataset(id);
    let y = center_response(&d).expect("non-constant response");
    let hyper = fit_hyperparams(&d, &y, &opts.fit).expect("hyperparameters");
    let mm = build_model_matrix(&d, opts.scope.resolve(&d)).expect("model matrix");
    let (u, _, est) = working_estimate(&d, &mm, &y, &hyper, opts.standardize).expect("estimate");
    let cons = heredity_constraints(&mm, opts.heredity);
    let garrote = Garrote::new(&u, &est.beta, &y.values, &est.posterior_weight_diag, &cons).expect("garrote");
    PathFixture {
        garrote,
        grid: m_grid(d.n_runs(), opts.grid_points, GridRange::Narrow).expect("grid"),
        hyper,
        response: y,
    }
}

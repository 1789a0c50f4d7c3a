from app.sampler.base import BaseSampler, response_counts, step_beta, step_z
from app.sampler.distributions import (
    RngStream,
    sample_categorical,
    sample_dirichlet,
    sample_inverse_gamma,
    softmax,
)
from app.sampler.dynamic import (
    DynamicSgldSampler,
    SgldDiagnostics,
    run_dynamic,
    sgld_gradient,
    step_pi_tilde_sgld,
    step_sigma,
)
from app.sampler.engine import EstimationEngine
from app.sampler.factory import get_sampler
from app.sampler.likelihood import observed_loglik
from app.sampler.priors import default_priors
from app.sampler.state import ChainState, PosteriorDraws, merge_draws
from app.sampler.static import StaticGibbsSampler, init_state, run_gibbs, step_pi

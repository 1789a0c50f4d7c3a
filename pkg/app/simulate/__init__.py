from app.simulate.generator import (
    DESIGNS,
    Design,
    TrueParams,
    draw_true_params,
    random_walk_logits,
    simulate_dynamic,
    simulate_static,
)
from app.simulate.recovery import (
    beta_row_correlation,
    recovery_experiment,
    recovery_frame,
    recovery_gap,
    split_sample,
)

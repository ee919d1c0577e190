"""Linear multiclass classification optimized for top-k accuracy.

Loss families: one-vs-all hinge/smoothed-hinge/logistic, multiclass
hinge and softmax, top-k hinge (sum-capped and radius-capped variants)
with smoothed versions, top-k entropy, and the nonconvex truncated
top-k entropy. Convex losses train by stochastic dual coordinate
ascent; the truncated entropy by warm-started gradient descent.
"""

from .datasets import (
    CircleSpec,
    Dataset,
    SplitSpec,
    circle_bayes_topk_error,
    generate_circle,
    load_libsvm,
    save_libsvm,
    split,
)
from .entropy import EntropySolution, entropy_prox, topk_entropy_loss
from .gd import GdConfig, GdReport, gd_train
from .lambert import lambert_v, lambert_v_deriv, lambert_v_inv
from .losses import (
    LossSpec,
    ScoreContext,
    bayes_topk_error,
    eval_loss,
    grad_loss,
    topk_error,
)
from .metrics import GridSpec, MetricsTable, cross_validate, topk_accuracy
from .model import Model, load_model, save_model
from .projections import TopkSimplexSpec, project_simplex_cap, project_topk
from .sdca import (
    DualState,
    TrainConfig,
    TrainReport,
    ova_train,
    primal_dual_objectives,
    sdca_train,
    sdca_update_example,
)

__version__ = "0.1.0"

"""Online adaptive metric learning from a stream of triplet constraints.

An ensemble of depth-varying embedding models is trained one constraint at a
time: an adaptive-bound triplet loss guarantees every constraint produces an
update, online gradient descent moves the shared matrices, and a hedge-style
multiplicative update reweights the depths.  The learned metric serves
classification, pair verification, and top-k retrieval queries.
"""

from .checkpoint import load_checkpoint, save_checkpoint
from .constraints import (
    PairConstraint,
    TripletConstraint,
    as_pairs,
    build_stream,
    read_stream,
    resolve_triplets,
    sample_seeds,
    transitive_closure,
    write_stream,
)
from .data import (
    LabeledDataset,
    LabeledInstance,
    ScalingRecord,
    apply_scaling,
    load_csv,
    save_csv,
    scale_minmax,
    split,
)
from .deploy import (
    ReferenceStore,
    RetrievalResult,
    build_store,
    classify,
    continuous_similarity_score,
    retrieve,
    similarity_probability,
)
from .gradcheck import GradCheckReport, run_gradient_check
from .loss import (
    BoundPair,
    TripletLossReport,
    attractive_loss,
    compute_bounds,
    dis_threshold,
    distance,
    repulsive_loss,
    sim_threshold,
    triplet_loss,
)
from .metrics import (
    EvalReport,
    error_rate,
    macro_f1,
    pairwise_ranking_auc,
    recall_at_k,
    roc_auc,
    utilization,
)
from .model import (
    ForwardTrace,
    ModelConfig,
    ParameterSet,
    forward,
    init_model,
    space_estimate,
)
from .training import (
    StepReport,
    TrainingLog,
    Triplet,
    backward,
    hedge_update,
    train_step,
    train_stream,
)

__version__ = "0.1.0"

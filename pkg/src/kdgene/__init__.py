"""Link prediction on typed knowledge graphs via tensor decomposition with a
gated entity-relation interaction step, plus training, filtered ranking
evaluation, KG ablation, and link-enrichment analysis."""

__version__ = "0.1.0"

from .ablation import KGVariantSpec, build_variant, run_ablation, variant_presets
from .cells import InteractionCell, interact, interact_backward, new_cell
from .config import TrainConfig, expand_grid, load_config, parse_config
from .enrichment import EnrichmentResult, binomial_tail, link_enrichment
from .evaluator import (
    MetricReport,
    RankingResult,
    evaluate_fold,
    hit_ratio,
    mean_average_precision,
    rank_query,
)
from .kg import (
    FoldSplit,
    Triple,
    TripleStore,
    add_reciprocals,
    filtered_candidates,
    load_triples,
    make_folds,
)
from .models import (
    ModelParams,
    init_params,
    load_checkpoint,
    save_checkpoint,
    score_all_tails,
    score_triple,
)
from .trainer import (
    AdagradState,
    NonFiniteLossError,
    TrainResult,
    adagrad_step,
    gradient_check,
    loss_batch,
    train,
)

__all__ = [
    "AdagradState",
    "EnrichmentResult",
    "FoldSplit",
    "InteractionCell",
    "KGVariantSpec",
    "MetricReport",
    "ModelParams",
    "NonFiniteLossError",
    "RankingResult",
    "TrainConfig",
    "TrainResult",
    "Triple",
    "TripleStore",
    "adagrad_step",
    "add_reciprocals",
    "binomial_tail",
    "build_variant",
    "evaluate_fold",
    "expand_grid",
    "filtered_candidates",
    "gradient_check",
    "hit_ratio",
    "init_params",
    "interact",
    "interact_backward",
    "link_enrichment",
    "load_checkpoint",
    "load_config",
    "load_triples",
    "loss_batch",
    "make_folds",
    "mean_average_precision",
    "new_cell",
    "parse_config",
    "rank_query",
    "run_ablation",
    "save_checkpoint",
    "score_all_tails",
    "score_triple",
    "train",
    "variant_presets",
]

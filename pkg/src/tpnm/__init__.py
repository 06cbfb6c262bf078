"""Temporal link prediction with time-parameterized matrices."""

from .errors import (
    DomainError,
    NonFinite,
    NumericError,
    ParseError,
    TPNMError,
    UsageError,
    ValidationError,
)
from .graph import Dataset, DatasetStats, EventSequence, Node, dataset_stats, validate_sequence
from .tpmatrix import WeightScheme, normalize_tp, raw_temporal_matrix, tp_matrix
from .tppi import TPPIVector, classic_decay, decay, pair_probability, tppi, tppi_vector
from .trainer import FactorModel, Hyperparams, converged, predict_next, train
from .modelio import load_model, save_model
from .ingest import (
    SyntheticConfig,
    crm_config,
    deterministic_config,
    load_activity_csv,
    load_edge_list,
    random_successor_config,
    synthesize,
)
from .eval import ablation_curves, auc, auc_protocol, correlation_analysis, mae, rmse, runtime_bench

__version__ = "0.1.0"

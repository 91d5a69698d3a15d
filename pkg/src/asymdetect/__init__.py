"""Identify asymptomatic nodes in SI network epidemics from a single
partially observed snapshot: network generation, epidemic simulation,
feature extraction, a from-scratch two-layer GCN, and AUC / top-k%
evaluation against the observed-betweenness baseline."""

from .dataset import DatasetConfig, generate_dataset, read_dataset
from .epidemic import (EpidemicConfig, EpidemicInstance, apply_observation,
                       generate_instance, si_step, simulate_si)
from .features import (FEATURE_COLUMNS, FeatureMatrix, compute_features,
                       contact_k, neighbourhood_contact_2, normalize_features)
from .gcn import (AdamState, GcnModel, TrainConfig, TrainingExample, adam_step,
                  backward, forward, masked_bce, normalize_adjacency,
                  prepare_example, score_instance, train)
from .graphs import (Graph, GenParamsBA, GenParamsWS, betweenness, bfs_distances,
                     generate_ba, generate_ws, is_connected, observed_betweenness)
from .metrics import (EvalReport, auc, baseline_scores, evaluate, evaluate_scored,
                      top_k_precision)

__version__ = "0.1.0"

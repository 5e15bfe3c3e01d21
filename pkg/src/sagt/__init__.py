"""Node classification via enriched features, PPR subgraph sampling, and a
structure-aware graph transformer."""

from .graph import (CompatibilityMatrix, DatasetMetrics, Graph,
                    compatibility_matrix, cosine_similarity, dataset_metrics,
                    degree_vector, rw_norm_adjacency, sym_norm_adjacency)
from .enrichment import (EnrichedFeatures, GcnParams, class_centric_concat,
                         class_representatives, connection_aware, enrich, fuse,
                         gcn_amplify)
from .sampler import (SamplingMatrix, SubgraphSequence, ppr_row,
                      sample_subgraphs, sampling_matrix)
from .model import (ModelConfig, ModelParams, StructuralEncoding,
                    build_structural_encoding, ensemble_predict, forward,
                    sa_mha, structural_bias, transformer_block)
from .trainer import (SplitMasks, TrainConfig, cross_entropy, evaluate,
                      make_splits, train_gcn_stage, train_transformer_stage)
from .pipeline import RunConfig, run_pipeline

__version__ = "0.1.0"

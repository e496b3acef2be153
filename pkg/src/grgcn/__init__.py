"""Query-graph ranking for knowledge-base question answering with relational graph convolutions."""

from .config import TrainConfig, load_config
from .dataset import DatasetRecord, EntityMention, load_dataset
from .evaluation import Metrics, Prediction, evaluate, pr_f1, predict
from .kb import KnowledgeBase, Triple, brute_force_execute, execute, load_triples, neighbors
from .lexicon import SenseLexicon, load_embeddings, load_lexicon, tokenize_relation_label
from .model import GRGCN
from .query_graph import GenLimits, QueryGraph, generate_candidates, parse_logical_form, to_logical_form, validate
from .trainer import Checkpoint, hinge_loss, train

__all__ = [
    "Checkpoint", "DatasetRecord", "EntityMention", "GRGCN", "GenLimits", "KnowledgeBase", "Metrics",
    "Prediction", "QueryGraph", "SenseLexicon", "TrainConfig", "Triple", "brute_force_execute", "evaluate",
    "execute", "generate_candidates", "hinge_loss", "load_config", "load_dataset", "load_embeddings",
    "load_lexicon", "load_triples", "neighbors", "parse_logical_form", "pr_f1", "predict",
    "to_logical_form", "tokenize_relation_label", "train", "validate",
]

"""Deep Q-learning for integrating compressed contexts into knowledge graphs."""

from .agent import AgentConfig, DQNIntegrator, TrainingLog, train
from .baselines import LinearModel, SupervisedIntegrator, fit_supervised, rule_based_choose
from .contexts import (
    AmbiguityKind,
    CompressedContext,
    Episode,
    HoldoutSplit,
    episode_stream,
    make_context,
    split_holdout,
)
from .encoding import EncoderConfig, StateEncoder, encode_state, encode_token
from .env import IntegrationEnv, Transition, action_count
from .evaluation import EvalReport, emit_report, integration_accuracy, quality_index, timed_evaluate
from .kg import KnowledgeGraph, Triple, build_graph, parse_triples, serialize
from .qnet import QNetwork, init_network, load_checkpoint, save_checkpoint
from .synthetic import make_synthetic_graph

__version__ = "0.1.0"

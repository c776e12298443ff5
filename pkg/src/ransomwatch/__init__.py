"""Ransomware monitoring-detection-response engine.

Three cooperating layers detect ransomware from file-system event streams:
decoy-file monitoring, semantic ransom-note scoring, and a multi-granularity
behavioral classifier. A trace simulator makes the whole pipeline trainable
and testable at desk scale.
"""

__version__ = "0.1.0"

from .events import (
    Alert,
    FileEvent,
    Level,
    Operation,
    ProcessWindow,
    Response,
    ThreatLevel,
    Trigger,
    TriggerKind,
    parse_event_log,
    serialize_events,
    window_events,
)
from .decoys import (
    DecoyKind,
    DecoyRegistry,
    DecoySpec,
    NameStyle,
    check_event,
    deploy,
    generate_decoy,
    watch_live,
)
from .notes import (
    GenePool,
    SimilarityVerdict,
    TokenizedNote,
    build_pool,
    ngrams,
    similarity,
    sweep_threshold,
    sweep_window,
    tokenize,
)
from .features import (
    EncryptionMode,
    FeatureVector,
    Mode,
    classify_mode,
    extract_features,
    feature_report,
)
from .graph import BehaviorGraph, PatternEmbedding, build_graph, encode
from .gbdt import BoostedForest, BoostParams, TreeNode, TreeParams, best_split, fit, grow_tree
from .pipeline import Engine, PipelineConfig, ReplayResult, metrics_report, run_live, run_replay
from .simulator import (
    BenignProfile,
    BenignSpec,
    Corpus,
    RansomwareSpec,
    ScenarioSpec,
    TreeSpec,
    build_corpus,
    generate,
    write_scenario,
)

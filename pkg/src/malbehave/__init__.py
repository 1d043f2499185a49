"""Behavior-profile analytics: parse API-call traces, group them into
behavior families with Jaccard distances and an average-linkage tree,
extract per-family characteristics, classify new profiles, and score any
family grouping against peer engines."""

from .characteristics import (
    EnduranceConfig,
    GroupCharacteristics,
    characteristics_from_report,
    characteristics_report,
    classification_scores,
    classify,
    common_set,
    distinct_characteristics,
)
from .pcs import (
    EngineLabelTable,
    FamilyNormalizer,
    PairwiseIndicator,
    approval,
    engine_weight,
    grouping_to_labels,
    indicator,
    normalize_family,
    pcs_report,
    pcs_score,
    text_mining_grouping,
)
from .phylo import (
    Grouping,
    PhyloNode,
    PhyloTree,
    cut_tree,
    rand_index,
    to_newick,
    upgma,
)
from .profile import (
    ApiEvent,
    BehaviorElement,
    ElementSet,
    FeatureConfig,
    Profile,
    ProfileError,
    ProfileParseError,
    ProfileSchemaError,
    canonicalize_event,
    extract_elements,
    parse_profile,
    read_corpus,
    serialize_profile,
)
from .similarity import DistanceMatrix, distance_matrix, jaccard_distance
from .synth import (
    HOOKED_APIS,
    MUTATION_OPS,
    CorpusSpec,
    FamilyTemplate,
    Xorshift64Star,
    generate_corpus,
    generate_family,
    write_corpus,
)

__version__ = "0.1.0"

__all__ = [
    "ApiEvent",
    "BehaviorElement",
    "CorpusSpec",
    "DistanceMatrix",
    "ElementSet",
    "EngineLabelTable",
    "EnduranceConfig",
    "FamilyNormalizer",
    "FamilyTemplate",
    "FeatureConfig",
    "GroupCharacteristics",
    "Grouping",
    "HOOKED_APIS",
    "MUTATION_OPS",
    "PairwiseIndicator",
    "PhyloNode",
    "PhyloTree",
    "Profile",
    "ProfileError",
    "ProfileParseError",
    "ProfileSchemaError",
    "Xorshift64Star",
    "approval",
    "canonicalize_event",
    "characteristics_from_report",
    "characteristics_report",
    "classification_scores",
    "classify",
    "common_set",
    "cut_tree",
    "distance_matrix",
    "distinct_characteristics",
    "engine_weight",
    "extract_elements",
    "generate_corpus",
    "generate_family",
    "grouping_to_labels",
    "indicator",
    "jaccard_distance",
    "normalize_family",
    "parse_profile",
    "pcs_report",
    "pcs_score",
    "rand_index",
    "read_corpus",
    "serialize_profile",
    "text_mining_grouping",
    "to_newick",
    "upgma",
    "write_corpus",
]

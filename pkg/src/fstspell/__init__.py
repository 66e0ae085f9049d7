"""Contextual spelling correction of CTC wordpiece lattices with WFSTs."""

from .semiring import LOG, TROPICAL, Semiring, weight_plus
from .fst import (
    Arc,
    Fst,
    SymbolTable,
    compose,
    determinize,
    invert,
    path_count,
    project_output,
    rmeps,
    shortest_distance,
    shortest_paths,
)
from .lattice import (
    ConfusionModel,
    Lattice,
    build_sausage,
    corrupt,
    glue_wordpieces,
    sample_random_paths,
    words_to_lattice,
)
from .phonetics import PhonemeInventory, build_edit_fst, build_phoneme_expander, feature_distance
from .g2p import (
    AlignmentTable,
    Lexicon,
    WordpieceModel,
    build_g2p_fst,
    build_w_fst,
    extract_alignments,
    train_ibm2,
)
from .rewrite import (
    EngineConfig,
    EntityContext,
    Grammar,
    RewriteCandidate,
    RewriteDecision,
    RewriteEngine,
    build_entity_fst,
    compile_tagger,
    comparison_score,
    decide,
    extract_tagged_span,
    retrieve,
)
from .evalharness import compute_ser, gen_testset, run_eval, sample_distractors

__version__ = "0.1.0"

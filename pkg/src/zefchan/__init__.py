"""Zero-error capacity lab for q-ary adversarial error-erasure channels with
constant-bit noiseless feedback: capacity calculus, an end-to-end achievability
protocol, and the babble-and-push converse attack."""

from .capacity import (
    CapacityResult,
    ChannelParams,
    capacity_erasures_only,
    capacity_errors_only,
    capacity_full_feedback_binary,
    capacity_full_feedback_upper,
    capacity_o1,
    effective_fraction,
    interior_argmin,
    large_alphabet_gap,
    tangency_point,
    verify_convexity,
)
from .channel import (
    Action,
    AdversaryBudget,
    BudgetError,
    ERASE,
    KEEP,
    ReceivedWord,
    Word,
    apply_adversary_actions,
    distance,
    measure_trajectory,
    parse_received,
    parse_word,
    received_to_text,
    substitute,
    word_to_text,
)
from .code import (
    ConfigError,
    FeedbackCode,
    SchemeParams,
    derive_params,
    export_code,
    feedback_distance_threshold,
    find_feedback_symbol,
    import_code,
    sample_code,
    verify_list_decodability,
)
from .protocol import (
    Adversary,
    BobDecoder,
    ErrorEvent,
    SessionResult,
    compute_t_min,
    decoding_threshold,
    list_decode_prefix,
    load_transcript,
    reference_trajectory,
    run_session,
    transcript_to_json,
)
from .adversary import (
    AttackTranscript,
    GreedyPushAdversary,
    HighTypeAdversary,
    IdentityAdversary,
    LowTypeAdversary,
    PlannedAdversary,
    RandomAdversary,
    ScriptedAdversary,
    STRATEGIES,
    WorstCaseResult,
    attack_transcript_to_json,
    babble,
    babble_and_push,
    build_candidate_set,
    build_scm,
    count_action_plans,
    delta_thresholds,
    exhaustive_worst_case,
    make_strategy,
    push,
)
from .qent import (
    ball_size_bound,
    ball_size_exact,
    entropy,
    entropy_inverse,
    plotkin_max_codewords,
)

__version__ = "0.1.0"

"""Quantitative analysis of the phase-remapping Trojan-horse attack on bidirectional QKD."""
from .attack import (
    AttackSolution,
    EfficiencyProfile,
    PenaltyPair,
    RemappedEnsemble,
    ResendSpec,
    build_penalty_bb84,
    build_penalty_sarg04,
    min_qber,
    optimal_curve,
    suboptimal_qber,
    transmittance_at,
)
from .channel import LinkObservables, SystemParams, normal_observables
from .keyrate import PostProcState, bstep, gllp_rate, run_post, worst_case_bounds
from .qmath import PlaneState, SymOp2
from .strategies import StrategyParams, match_normal, strategy_one, strategy_three, strategy_two

__version__ = "0.1.0"

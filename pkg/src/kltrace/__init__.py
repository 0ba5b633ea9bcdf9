"""Stage-indexed trace semantics for finite branching systems.

Finite systems with set- or distribution-valued branching are analysed
through canonical distributive laws: the package checks the law axioms,
computes stage-indexed trace semantics with exact rational arithmetic,
tests the restriction coherence that characterises infinite behaviour,
and answers trace-equivalence, distance, and ultimately-periodic
membership queries.
"""

__version__ = "0.1.0"

from .finset import (
    UNIT,
    UNIT_SET,
    Atom,
    Elem,
    FinMap,
    FinSet,
    Pair,
    Tag,
    Unit,
    coproduct,
    final_map,
    product,
)
from .effects import (
    AffineResult,
    EffectKind,
    EffectValue,
    SamplerConfig,
    affine_part,
    check_monad_laws,
    dist_value,
    dstr,
    is_affine,
    map_value,
    mult,
    set_value,
    unit,
)
from .polyfun import (
    Coprod,
    Const,
    IdF,
    PolyFunctor,
    Prod,
    StageFamily,
    apply_map,
    apply_obj,
    final_sequence,
    invariant_check,
    label_id,
    label_id_term,
)
from .distlaw import (
    EndoMorphism,
    GuardedLawStage,
    LawSpec,
    MonadMorphism,
    SuitabilityError,
    canonical_law,
    check_law_axioms,
    check_morphism,
    check_omega_suitable,
    guarded_law_stage,
    identity_endo_morphism,
    identity_monad_morphism,
    inclusion_morphism,
    inject_termination_morphism,
    relabel_morphism,
    support_morphism,
    transform_system,
)
from .traces import (
    EquivResult,
    LassoResult,
    MetricResult,
    Partition,
    System,
    TraceTable,
    check_coherence,
    equiv_partitions,
    lasso_membership,
    pseudo_metric,
    stage_semantics,
    verify_omega_consistency,
)
from .report import Report

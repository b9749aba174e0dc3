from .structure import BlockSpec, Characteristics, NilpotentStructure, Ordering, StructureCheck
from .reports import CheckResult, EquivalenceReport, PreSCFDiagnosis, ReproduceReport
from .problem import MultibodyBlocks, ProblemFile, StructureKind, StructureTag
from .params import NormalizeParams, SolveParams, StageName, STAGE_ALIASES
from .settings import CanonSettings

__all__ = [
    'BlockSpec', 'Characteristics', 'NilpotentStructure', 'Ordering', 'StructureCheck',
    'CheckResult', 'EquivalenceReport', 'PreSCFDiagnosis', 'ReproduceReport',
    'MultibodyBlocks', 'ProblemFile', 'StructureKind', 'StructureTag',
    'NormalizeParams', 'SolveParams', 'StageName', 'STAGE_ALIASES',
    'CanonSettings',
]

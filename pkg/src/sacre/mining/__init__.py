"""Context datasets, ARFF persistence and rule learning."""

from .arff import (ArffArityError, ArffAttributeError, ArffError, ArffHeaderError,
                   ArffValueError, arff_read, arff_write)
from .dataset import ACTIVE, INACTIVE, Attribute, Dataset, DatasetError
from .evaluation import (EvalMeasures, FoldSizeError, confusion_measures, cross_validate,
                         stratified_folds)
from .ripper import (RipperClassifier, Rule, RuleSet, candidate_thresholds, fit_ruleset, foil_gain,
                     learn_ruleset, ruleset_to_operationalization, threshold_candidates)

__all__ = [
    "ACTIVE", "INACTIVE", "ArffArityError", "ArffAttributeError", "ArffError",
    "ArffHeaderError", "ArffValueError", "Attribute", "Dataset", "DatasetError",
    "EvalMeasures", "FoldSizeError", "RipperClassifier", "Rule", "RuleSet",
    "arff_read", "arff_write", "candidate_thresholds", "confusion_measures",
    "cross_validate", "fit_ruleset", "foil_gain", "learn_ruleset", "ruleset_to_operationalization",
    "stratified_folds", "threshold_candidates",
]

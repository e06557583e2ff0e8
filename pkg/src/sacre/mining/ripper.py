"""Sequential-covering rule induction in the RIPPER family.

Rules are grown greedily by FOIL information gain on two thirds of the
remaining data and pruned on the other third, one rule at a time, until no
positive examples remain or a rule fails the prune-set precision test.
The target ("positive") class is always ``active``; records covered by no
rule fall to the ``inactive`` default.

Unlike full RIPPER there is no MDL stopping criterion and no optimization
pass over the finished rule set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import unique_labels
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..reqmodel import AtomicCondition, Operationalization
from .dataset import ACTIVE, INACTIVE, Dataset

GAIN_EPS = 1e-12


def foil_gain(covered_before, covered_after) -> float:
    """FOIL gain of refining a rule from ``(p0, n0)`` to ``(p1, n1)`` coverage."""
    p0, n0 = covered_before
    p1, n1 = covered_after
    if p1 <= 0:
        return 0.0
    return p1 * (math.log2(p1 / (p1 + n1)) - math.log2(p0 / (p0 + n0)))


def _foil_gain_vec(p0, n0, p1, n1):
    p1 = np.asarray(p1, dtype=float)
    n1 = np.asarray(n1, dtype=float)
    base = math.log2(p0 / (p0 + n0))
    safe = np.maximum(p1, 1.0)
    g = p1 * (np.log2(safe / (safe + n1)) - base)
    return np.where(p1 > 0, g, 0.0)


def _boundaries(values: np.ndarray, y: np.ndarray):
    """Distinct sorted values, per-value class counts and class-boundary flags."""
    order = np.argsort(values, kind="stable")
    vs, ys = values[order], y[order]
    if not len(vs):
        empty = np.zeros(0, np.int64)
        return vs, empty, empty, np.zeros(0, dtype=bool)
    first = np.empty(len(vs), dtype=bool)
    first[0] = True
    np.not_equal(vs[1:], vs[:-1], out=first[1:])
    start = np.flatnonzero(first)
    uniq = vs[start]
    counts = np.diff(np.append(start, len(vs)))
    pos = np.add.reduceat(ys.astype(np.int64), start)
    neg = counts - pos
    pure_pos, pure_neg = neg == 0, pos == 0
    same = (pure_pos[:-1] & pure_pos[1:]) | (pure_neg[:-1] & pure_neg[1:])
    return uniq, pos, neg, ~same


def _pool_counts(values: np.ndarray, y: np.ndarray, grow: np.ndarray):
    """Distinct sorted values with per-value counts of (positives, negatives,
    grow positives, grow negatives)."""
    order = np.argsort(values, kind="stable")
    vs = values[order]
    first = np.empty(len(vs), dtype=bool)
    first[0] = True
    np.not_equal(vs[1:], vs[:-1], out=first[1:])
    start = np.flatnonzero(first)
    yo, go = y[order], grow[order]
    w = np.column_stack((yo, ~yo, yo & go, ~yo & go)).astype(np.int64)
    return vs[start], np.add.reduceat(w, start, axis=0)


def _merge_bounds(conds):
    """Keep the tightest bound per (attribute, side), in first-seen order."""
    tightest = {}
    for j, op, t in conds:
        key = (j, op)
        prev = tightest.get(key)
        if prev is None or (op == ">=" and t > prev) or (op == "<=" and t < prev):
            tightest[key] = t
    out, seen = [], set()
    for j, op, _ in conds:
        if (j, op) not in seen:
            seen.add((j, op))
            out.append((j, op, tightest[(j, op)]))
    return out


def threshold_candidates(values, y) -> np.ndarray:
    """Midpoints between consecutive distinct values whose classes differ."""
    values = np.asarray(values, dtype=float)
    y = np.asarray(y, dtype=bool)
    if len(values) < 2:
        return np.zeros(0)
    uniq, _, _, boundary = _boundaries(values, y)
    return np.unique((uniq[:-1] + uniq[1:])[boundary] / 2.0)


def candidate_thresholds(ds: Dataset, attr: str) -> list[float]:
    j = ds.feature_names.index(attr)
    if not ds.attributes[j].numeric:
        raise ValueError(f"{attr} is not numeric")
    X = ds.matrix()
    return [float(t) for t in threshold_candidates(X[:, j], ds.labels())]


@dataclass(frozen=True)
class Rule:
    conditions: tuple[AtomicCondition, ...]
    predicted_class: str = ACTIVE

    def __str__(self):
        return " AND ".join(str(c) for c in self.conditions) + f" => {self.predicted_class}"


@dataclass(frozen=True)
class RuleSet:
    """Ordered rules for the active class, falling back to ``default_class``.

    ``degenerate`` marks a rule set learned from single-class data.
    """

    rules: tuple[Rule, ...] = ()
    default_class: str = INACTIVE
    degenerate: bool = False

    def covers(self, columns, n) -> np.ndarray:
        hit = np.zeros(n, dtype=bool)
        for rule in self.rules:
            m = np.ones(n, dtype=bool)
            for c in rule.conditions:
                m &= c.mask(columns[c.variable])
            hit |= m
        return hit

    def predict_active(self, columns, n) -> np.ndarray:
        if self.default_class == ACTIVE:
            return np.ones(n, dtype=bool)
        return self.covers(columns, n)

    def __str__(self):
        lines = [str(r) for r in self.rules]
        lines.append(f"=> {self.default_class}")
        return "\n".join(lines)


class RipperClassifier(ClassifierMixin, BaseEstimator):
    """Binary rule learner with a scikit-learn interface.

    Parameters
    ----------
    positive_class : label, default="active"
        Class the rules describe. With boolean targets, ``True`` is used.
    feature_names : sequence of str, optional
        Names used in the learned conditions (default ``x0, x1, ...``).
    nominal_features : sequence of int, optional
        Columns that only admit equality tests.
    grow_fraction : float, default=2/3
        Share of each class used for growing a rule; the rest prunes it.
    min_rule_precision : float, default=0.5
        A pruned rule below this prune-set precision stops induction.
    random_state : int, default=0
        Seed of the grow/prune splits.
    """

    def __init__(self, positive_class=ACTIVE, feature_names=None, nominal_features=None,
                 grow_fraction=2 / 3, min_rule_precision=0.5, random_state=0):
        self.positive_class = positive_class
        self.feature_names = feature_names
        self.nominal_features = nominal_features
        self.grow_fraction = grow_fraction
        self.min_rule_precision = min_rule_precision
        self.random_state = random_state

    # -- sklearn API ---------------------------------------------------------

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float, ensure_min_samples=1)
        self.classes_ = unique_labels(y)
        self.n_features_in_ = X.shape[1]
        names = self.feature_names
        self.feature_names_ = [f"x{j}" for j in range(X.shape[1])] if names is None else list(names)
        if len(self.feature_names_) != X.shape[1]:
            raise ValueError("feature_names does not match the number of columns")
        pos_label = True if y.dtype == bool else self.positive_class
        target = y == pos_label
        self.pos_label_ = pos_label
        neg = [c for c in self.classes_ if c != pos_label]
        self.neg_label_ = neg[0] if neg else (False if y.dtype == bool else INACTIVE)

        self.ruleset_ = self._fit_target(X, target)
        return self

    def _fit_target(self, X: np.ndarray, target: np.ndarray) -> RuleSet:
        if target.all() or not target.any():
            default = ACTIVE if target.all() else INACTIVE
            return RuleSet((), default, degenerate=True)
        rng = np.random.default_rng(self.random_state)
        nominal = set(self.nominal_features or ())
        return RuleSet(tuple(self._induce(X, target, nominal, rng)))

    def predict(self, X):
        check_is_fitted(self, "ruleset_")
        X = check_array(X, dtype=float)
        hit = self.decision_mask(X)
        return np.where(hit, self.pos_label_, self.neg_label_)

    def decision_mask(self, X) -> np.ndarray:
        """Boolean "predicted positive" vector."""
        X = np.asarray(X, dtype=float)
        columns = {name: X[:, j] for j, name in enumerate(self.feature_names_)}
        return self.ruleset_.predict_active(columns, X.shape[0])

    # -- induction -----------------------------------------------------------

    def _induce(self, X, y, nominal, rng):
        remaining = np.arange(len(y))
        rules = []
        while y[remaining].any():
            grow, prune = self._split(remaining, y, rng)
            conds = self._grow(X, y, grow, nominal, remaining)
            if not conds:
                break
            conds = self._prune(conds, X, y, prune, remaining)
            p, n = self._coverage(conds, X, y, prune)
            if p + n and p / (p + n) < self.min_rule_precision:
                break
            rules.append(Rule(tuple(self._condition(c) for c in _merge_bounds(conds))))
            covered = self._mask(conds, X, remaining)
            remaining = remaining[~covered]
        return rules

    def _split(self, idx, y, rng):
        grow, prune = [], []
        for label in (True, False):
            members = idx[y[idx] == label]
            if not len(members):
                continue
            members = rng.permutation(members)
            k = max(1, math.floor(len(members) * self.grow_fraction + 0.5))
            grow.append(members[:k])
            prune.append(members[k:])
        return np.sort(np.concatenate(grow)), np.sort(np.concatenate(prune))

    def _grow(self, X, y, idx, nominal, pool=None):
        """Greedy FOIL growth on ``idx``.

        Numeric cut points are the class boundaries of ``pool`` (all
        remaining records the rule covers), so a cut sits in the real gap
        rather than in a gap of the grow sample.  Gain ties go to the
        candidate covering fewer negatives of ``pool``.  Once the rule is
        pure on the grow split, growth continues on the pool's counts until
        it is pure there too.  A numeric bound may be tightened by a later
        condition on the same side; :func:`_merge_bounds` folds them.
        """
        conds = []
        used_nominal = set()
        pool = idx if pool is None else pool
        in_grow = np.isin(pool, idx, assume_unique=True)
        while True:
            yp = y[pool]
            p0 = int((yp & in_grow).sum())
            n0 = int(in_grow.sum()) - p0
            gp, gn = 2, 3       # count columns the gain is computed on
            if n0 == 0:
                p0, n0, gp, gn = int(yp.sum()), int((~yp).sum()), 0, 1
            if n0 == 0 or p0 == 0:
                break
            best = None
            for j in range(X.shape[1]):
                if j in used_nominal:
                    continue
                uniq, c = _pool_counts(X[pool, j], yp, in_grow)
                if j in nominal:
                    present = (c[:, gp] + c[:, gn]) > 0
                    p1, n1, q = c[present, gp], c[present, gn], c[present, 1]
                    cands = [(j, "=", float(u)) for u in uniq[present]]
                else:
                    pure_pos, pure_neg = c[:, 1] == 0, c[:, 0] == 0
                    same = (pure_pos[:-1] & pure_pos[1:]) | (pure_neg[:-1] & pure_neg[1:])
                    cut = np.flatnonzero(~same)
                    if not len(cut):
                        continue
                    thresholds = (uniq[cut] + uniq[cut + 1]) / 2.0
                    below = np.cumsum(c, axis=0)[cut]   # counts at or below each cut
                    p1 = np.concatenate((p0 - below[:, gp], below[:, gp]))
                    n1 = np.concatenate((n0 - below[:, gn], below[:, gn]))
                    q = np.concatenate((c[:, 1].sum() - below[:, 1], below[:, 1]))
                    cands = ([(j, ">=", float(t)) for t in thresholds]
                             + [(j, "<=", float(t)) for t in thresholds])
                gains = _foil_gain_vec(p0, n0, p1, n1)
                top = np.flatnonzero(gains >= gains.max() - GAIN_EPS)
                k = int(top[np.argmin(q[top])])
                g = float(gains[k])
                if (best is None or g > best[0] + GAIN_EPS
                        or (g >= best[0] - GAIN_EPS and q[k] < best[2])):
                    best = (g, cands[k], int(q[k]))
            if best is None or best[0] <= GAIN_EPS:
                break
            cond = best[1]
            conds.append(cond)
            if cond[1] == "=":
                used_nominal.add(cond[0])
            keep = self._mask([cond], X, pool)
            pool, in_grow = pool[keep], in_grow[keep]
        return conds

    def _prune(self, conds, X, y, idx, pool=None):
        """Drop final conditions while prune-set worth does not fall and no
        extra negative of ``pool`` (default: the prune set) gets covered."""
        pool = idx if pool is None else pool

        def score(length):
            p, n = self._coverage(conds[:length], X, y, idx)
            return ((p - n) / (p + n) if p + n else 0.0), self._coverage(conds[:length], X, y, pool)[1]

        length = len(conds)
        worth, neg = score(length)
        while length > 1:
            w, n = score(length - 1)
            if w < worth or n > neg:
                break
            length, worth, neg = length - 1, w, n
        return conds[:length]

    @staticmethod
    def _mask(conds, X, idx):
        m = np.ones(len(idx), dtype=bool)
        for j, op, t in conds:
            v = X[idx, j]
            if op == ">=":
                m &= v >= t
            elif op == "<=":
                m &= v <= t
            else:
                m &= np.abs(v - t) <= 1e-9
        return m

    def _coverage(self, conds, X, y, idx):
        m = self._mask(conds, X, idx)
        p = int(y[idx][m].sum())
        return p, int(m.sum()) - p

    def _condition(self, cond):
        j, op, t = cond
        return AtomicCondition(self.feature_names_[j], op, t)


def fit_ruleset(X, active, feature_names, nominal_features=(), seed: int = 0) -> RuleSet:
    """Array-level entry point: ``active`` is the boolean class vector."""
    if len(active) == 0:
        return RuleSet((), INACTIVE, degenerate=True)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != len(active) or X.shape[1] != len(feature_names):
        raise ValueError("X does not match the class vector and feature names")
    clf = RipperClassifier(feature_names=list(feature_names),
                           nominal_features=nominal_features, random_state=seed)
    # arrays from a Dataset are already clean; skip the estimator's validation
    clf.feature_names_ = list(feature_names)
    return clf._fit_target(X, np.asarray(active, dtype=bool))


def learn_ruleset(ds: Dataset, seed: int = 0) -> RuleSet:
    """Fit a :class:`RipperClassifier` on a context dataset."""
    return fit_ruleset(ds.matrix(), ds.labels(), ds.feature_names, ds.nominal_indices(), seed)


def ruleset_to_operationalization(rs: RuleSet) -> Operationalization:
    """One DNF clause per rule, in rule order."""
    return Operationalization(tuple(tuple(r.conditions) for r in rs.rules))

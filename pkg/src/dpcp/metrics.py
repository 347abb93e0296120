"""Estimation, imputation and outlier-detection quality against ground truth."""

from dataclasses import dataclass, asdict

import numpy as np

from .errors import ValidationError


class DegenerateReferenceError(ValidationError):
    """The reference matrix has zero norm, so a relative error is undefined."""


@dataclass
class ErrorReport:
    e_X: float
    e_O: float
    imputation_rel: float
    precision: float
    recall: float
    f1: float
    support_threshold: float

    def to_dict(self):
        return asdict(self)


def relative_error(A_hat, A_true):
    """``||A_hat - A_true||_F / ||A_true||_F``."""
    A_hat = np.asarray(A_hat, dtype=float)
    A_true = np.asarray(A_true, dtype=float)
    if A_hat.shape != A_true.shape:
        raise ValidationError(f"shape mismatch {A_hat.shape} vs {A_true.shape}")
    ref = np.linalg.norm(A_true)
    if ref == 0:
        raise DegenerateReferenceError("reference matrix has zero norm")
    return float(np.linalg.norm(A_hat - A_true) / ref)


def imputation_error(X_hat, X_true, mask):
    """Relative error restricted to the unobserved entries (``mask == 0``)."""
    hidden = np.asarray(mask) == 0
    if not np.any(hidden):
        raise ValidationError("mask has no unobserved entries to evaluate")
    return relative_error(np.asarray(X_hat)[hidden], np.asarray(X_true)[hidden])


def support_detection(O_hat, O_true, threshold=0.0):
    """Precision, recall and F1 of ``|O_hat| > threshold`` against ``O_true != 0``.

    An empty detected set has precision 1 and an empty true set has recall 1.
    """
    if threshold < 0:
        raise ValidationError("threshold must be nonnegative")
    detected = np.abs(np.asarray(O_hat)) > threshold
    actual = np.asarray(O_true) != 0
    tp = int(np.sum(detected & actual))
    n_det = int(np.sum(detected))
    n_act = int(np.sum(actual))
    precision = tp / n_det if n_det else 1.0
    recall = tp / n_act if n_act else 1.0
    f1 = 0.0 if precision * recall == 0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f1


def error_report(X_hat, O_hat, X_true, O_true, mask, lambda_1=None, threshold=None):
    """All metrics in one `ErrorReport`.

    The support cutoff defaults to ``lambda_1 / 2``. Quantities that are
    undefined for the inputs (zero-norm ``O_true``, no hidden entries) are
    reported as NaN.
    """
    if threshold is None:
        threshold = 0.0 if lambda_1 is None else lambda_1 / 2
    try:
        e_O = relative_error(O_hat, O_true)
    except DegenerateReferenceError:
        e_O = float("nan")
    try:
        imp = imputation_error(X_hat, X_true, mask)
    except ValidationError:
        imp = float("nan")
    precision, recall, f1 = support_detection(O_hat, O_true, threshold)
    return ErrorReport(
        e_X=relative_error(X_hat, X_true),
        e_O=e_O,
        imputation_rel=imp,
        precision=precision,
        recall=recall,
        f1=f1,
        support_threshold=float(threshold),
    )

"""IoU evaluation with ambiguous-pixel exclusion.

The confusion matrix counts pixels by (true class, predicted class);
ground-truth-ambiguous pixels are skipped entirely.  Per-class IoU is
n_ii / (t_i + sum_j n_ji - n_ii); mean IoU averages the classes.  A
class absent from both truth and prediction has an undefined 0/0 IoU
and scores 1 by convention, flagged in the report.
"""

from dataclasses import dataclass, field

import numpy as np

from .page_gt import LABEL_AMBIGUOUS


def accumulate_confusion(pred, gt, cm=None, n_cl: int = 2):
    """Count (gt, pred) pairs over non-ambiguous GT pixels.

    Adds onto ``cm`` when given, else starts from zeros.  The
    prediction must not contain the ambiguous label.
    """
    if pred.shape != gt.shape:
        raise ValueError(f"pred {pred.shape} and gt {gt.shape} dims differ")
    if (pred >= n_cl).any():
        raise ValueError(
            f"prediction contains labels outside the {n_cl} classes"
        )
    valid = gt != LABEL_AMBIGUOUS
    if (gt[valid] >= n_cl).any():
        raise ValueError(f"ground truth contains labels outside the {n_cl} classes")
    pairs = gt[valid].astype(np.int64) * n_cl + pred[valid].astype(np.int64)
    counts = np.bincount(pairs, minlength=n_cl * n_cl).reshape(n_cl, n_cl)
    if cm is None:
        return counts
    if cm.shape != (n_cl, n_cl):
        raise ValueError(f"existing matrix has shape {cm.shape}, expected {(n_cl, n_cl)}")
    return cm + counts


def absent_classes(cm):
    """Classes with no pixels in either truth or prediction (0/0 IoU)."""
    denom = cm.sum(axis=1) + cm.sum(axis=0) - np.diag(cm)
    return denom == 0


def iou_per_class(cm):
    """IoU per class: diagonal over (row sum + column sum - diagonal)."""
    cm = np.asarray(cm, dtype=np.int64)
    diag = np.diag(cm).astype(np.float64)
    denom = (cm.sum(axis=1) + cm.sum(axis=0) - np.diag(cm)).astype(np.float64)
    out = np.ones(cm.shape[0], dtype=np.float64)
    nz = denom > 0
    out[nz] = diag[nz] / denom[nz]
    return out


def mean_iou(cm) -> float:
    return float(iou_per_class(cm).mean())


@dataclass
class EvalReport:
    per_class_iou: list
    mean_iou: float
    confusion: list
    evaluated_pixels: int
    ambiguous_pixels: int
    absent_classes: list = field(default_factory=list)
    mode: str = "micro"

    def to_dict(self):
        return {
            "per_class_iou": self.per_class_iou,
            "mean_iou": self.mean_iou,
            "confusion": self.confusion,
            "evaluated_pixels": self.evaluated_pixels,
            "ambiguous_pixels": self.ambiguous_pixels,
            "absent_classes": self.absent_classes,
            "mode": self.mode,
        }


def build_report(cm, ambiguous_pixels: int = 0, mode: str = "micro") -> EvalReport:
    ious = iou_per_class(cm)
    return EvalReport(
        per_class_iou=[float(v) for v in ious],
        mean_iou=float(ious.mean()),
        confusion=[[int(v) for v in row] for row in cm],
        evaluated_pixels=int(cm.sum()),
        ambiguous_pixels=int(ambiguous_pixels),
        absent_classes=[int(i) for i in np.flatnonzero(absent_classes(cm))],
        mode=mode,
    )


DIFF_TP = (0, 255, 0)      # annotation found
DIFF_TN = (0, 0, 0)        # background kept
DIFF_FP = (255, 0, 0)      # background called annotation
DIFF_FN = (0, 0, 255)      # annotation missed
DIFF_AMBIGUOUS = (128, 128, 128)


def render_diff(pred, gt):
    """Annotation-class diff image: green TP, black TN, red FP, blue FN.

    Ground-truth-ambiguous pixels render gray.  ``pred`` must contain
    only the two real classes.
    """
    if pred.shape != gt.shape:
        raise ValueError(f"pred {pred.shape} and gt {gt.shape} dims differ")
    if (pred == LABEL_AMBIGUOUS).any():
        raise ValueError("prediction contains the ambiguous label")
    out = np.empty(pred.shape + (3,), dtype=np.uint8)
    pa = pred == 1
    ga = gt == 1
    out[pa & ga] = DIFF_TP
    out[~pa & ~ga] = DIFF_TN
    out[pa & ~ga] = DIFF_FP
    out[~pa & ga] = DIFF_FN
    out[gt == LABEL_AMBIGUOUS] = DIFF_AMBIGUOUS
    return out

"""Evaluation metrics: parameter error, scale-invariant transformation
error on the unit-square corners, and whole-dataset reports.

The parameter error is the Euclidean norm ||z - zhat||_2, exactly as the
printed formula (not its square). The transformation error maps the four
unit-square corners through both homographies, dehomogenizes each corner to
(x/w, y/w, 1), and takes

    sum_i ||p_i' - phat_i'|| / sum_j ||p_j'||

over the full homogeneous 3-vectors. Multiplying both homographies by a
non-zero constant leaves it unchanged.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .data import PatchPair, build_homography, read_rlds

CORNERS = np.array(
    [[0.0, 0.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 1.0], [0.0, 1.0, 1.0]]
)


class EvalError(ValueError):
    pass


@dataclass
class EvalReport:
    task: str
    model: str
    mean_param_error: float
    mean_trans_error: float
    sample_count: int

    def csv_row(self):
        return [
            self.task,
            self.model,
            f"{self.mean_param_error:.6f}",
            f"{self.mean_trans_error:.6f}",
            str(self.sample_count),
        ]


CSV_HEADER = ["task", "model", "mean_param_error", "mean_trans_error", "n"]


def write_reports_csv(path, reports):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CSV_HEADER)
        for r in reports:
            w.writerow(r.csv_row())


def format_report_table(reports):
    lines = [f"{'task':<14}{'model':<8}{'param err':>12}{'trans err':>12}{'n':>10}"]
    for r in reports:
        lines.append(
            f"{r.task:<14}{r.model:<8}{r.mean_param_error:>12.6f}"
            f"{r.mean_trans_error:>12.6f}{r.sample_count:>10}"
        )
    return "\n".join(lines)


def parameter_error(z, zhat):
    z = np.asarray(z, dtype=np.float64).ravel()
    zhat = np.asarray(zhat, dtype=np.float64).ravel()
    if z.shape != zhat.shape:
        raise EvalError(f"length mismatch: {z.shape} vs {zhat.shape}")
    return float(np.linalg.norm(z - zhat))


def _transformed_corners(h):
    q = CORNERS @ np.asarray(h, dtype=np.float64).T
    w = q[:, 2]
    if np.any(np.abs(w) < 1e-12):
        raise EvalError("a transformed corner is at infinity (w ~ 0)")
    return q / w[:, None]


def transformation_error(h, hhat):
    p = _transformed_corners(h)
    phat = _transformed_corners(hhat)
    num = np.linalg.norm(p - phat, axis=1).sum()
    den = np.linalg.norm(p, axis=1).sum()
    return float(num / den)


def reconstruct_homography(task, zhat):
    """Homography from (possibly out-of-range) predicted parameters."""
    return build_homography(task, zhat)


def extract_projective_z(hp):
    """Projective parameters of a patch homography, translation discarded.

    z1..z4 come from the upper-left 2x2 of H/h33 minus identity, z5, z6 from
    the normalized third row. The translation column has no counterpart in
    the projective parametrization and is excluded.
    """
    hp = np.asarray(hp, dtype=np.float64)
    h33 = hp[2, 2]
    if abs(h33) < 1e-12:
        raise EvalError("patch homography has h33 ~ 0")
    hn = hp / h33
    return np.array(
        [hn[0, 0] - 1.0, hn[0, 1], hn[1, 0], hn[1, 1] - 1.0, hn[2, 0], hn[2, 1]]
    )


def _predict(model, x, y, batch=1000):
    outs = []
    for lo in range(0, x.shape[0], batch):
        zhat, _ = model.forward(x[lo : lo + batch], y[lo : lo + batch])
        outs.append(np.asarray(zhat, dtype=np.float64))
    return np.concatenate(outs)


def evaluate_model(model, dataset, task, model_name=None):
    """Mean errors of a model over an RLDS file, arrays, or patch pairs.

    ``dataset`` may be an RLDS path, an (x, y, z) triple, or a list of
    :class:`PatchPair`. For patch pairs the transformation error compares the
    reconstructed homography against the stored ground truth, and the
    parameter error uses the projective parameters extracted from it.
    """
    name = model_name or model.config.kind
    if isinstance(dataset, (list, tuple)) and dataset and isinstance(dataset[0], PatchPair):
        pairs = dataset
        x = np.stack([p.x for p in pairs])
        y = np.stack([p.y for p in pairs])
        if model.config.zdim != task.zdim:
            raise EvalError(f"model zdim {model.config.zdim} != task {task.name}")
        zhat = _predict(model, x, y)
        perr = np.empty(len(pairs))
        terr = np.empty(len(pairs))
        for i, pair in enumerate(pairs):
            z = extract_projective_z(pair.ground_truth_h)
            perr[i] = parameter_error(z, zhat[i])
            terr[i] = transformation_error(
                pair.ground_truth_h, reconstruct_homography(task, zhat[i])
            )
        return EvalReport(task.name, name, float(perr.mean()), float(terr.mean()), len(pairs))

    if isinstance(dataset, (str, bytes)) or hasattr(dataset, "__fspath__"):
        file_task, x, y, z = read_rlds(dataset)
        if file_task.name != task.name:
            raise EvalError(
                f"dataset task {file_task.name} does not match requested {task.name}"
            )
    else:
        x, y, z = dataset
    if model.config.zdim != task.zdim:
        raise EvalError(f"model zdim {model.config.zdim} != task zdim {task.zdim}")
    zhat = _predict(model, x, y)
    z = np.asarray(z, dtype=np.float64)
    diffs = np.linalg.norm(z - zhat, axis=1)
    terr = np.empty(z.shape[0])
    for i in range(z.shape[0]):
        terr[i] = transformation_error(
            build_homography(task, z[i]), reconstruct_homography(task, zhat[i])
        )
    return EvalReport(
        task.name, name, float(diffs.mean()), float(terr.mean()), int(z.shape[0])
    )

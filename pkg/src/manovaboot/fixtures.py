"""Reference data: empirical EEG covariances per diagnosis and cell-size layouts."""

from __future__ import annotations

import numpy as np

# Six EEG responses: brain rate (temporal, frontal, central), then
# complexity (temporal, frontal, central).
COV_AD = np.array([
    [5.14, 5.04, 4.94, 5.63, 4.36, 4.46],
    [5.04, 6.55, 5.21, 5.74, 5.82, 4.83],
    [4.94, 5.21, 6.35, 5.39, 4.55, 6.63],
    [5.63, 5.74, 5.39, 8.88, 6.92, 6.64],
    [4.36, 5.82, 4.55, 6.92, 7.88, 7.15],
    [4.46, 4.83, 6.63, 6.64, 7.15, 13.84],
])

COV_MCI = np.array([
    [2.10, 1.95, 1.76, 1.45, 1.25, 0.69],
    [1.95, 2.18, 1.82, 1.59, 1.61, 0.86],
    [1.76, 1.82, 2.11, 1.41, 1.21, 1.08],
    [1.45, 1.59, 1.41, 2.23, 2.35, 1.19],
    [1.25, 1.61, 1.21, 2.35, 2.95, 1.23],
    [0.69, 0.86, 1.08, 1.19, 1.23, 1.03],
])

COV_SCC = np.array([
    [1.62, 1.17, 1.17, 0.76, 0.49, 0.32],
    [1.17, 1.41, 1.10, 0.63, 0.75, 0.37],
    [1.17, 1.10, 1.26, 0.54, 0.39, 0.41],
    [0.76, 0.63, 0.54, 0.64, 0.53, 0.30],
    [0.49, 0.75, 0.39, 0.53, 0.94, 0.28],
    [0.32, 0.37, 0.41, 0.30, 0.28, 0.28],
])

DIAGNOSIS_COVARIANCES = {"AD": COV_AD, "MCI": COV_MCI, "SCC": COV_SCC}

DIAGNOSES = ("AD", "MCI", "SCC")
SEXES = ("M", "F")
AGES = ("<70", ">=70")

# Patient counts by (sex, age, diagnosis).
CELL_COUNTS = {
    ("M", "<70"): (2, 15, 14),
    ("M", ">=70"): (10, 12, 6),
    ("F", "<70"): (9, 13, 29),
    ("F", ">=70"): (15, 17, 18),
}

# sex x diagnosis, age ignored
TWO_WAY_SIZES = (12, 27, 20, 24, 30, 47)
# sex x age x diagnosis with the two smallest cells raised to 7
THREE_WAY_SIZES = (7, 15, 14, 10, 12, 7, 9, 13, 29, 15, 17, 18)

EEG_COLUMNS = ("br_temporal", "br_frontal", "br_central", "cx_temporal", "cx_frontal", "cx_central")
SPECT_COLUMNS = ("mtl", "ltl", "ptl", "acg", "ptc", "tp")

# Mean shift per diagnosis (AD, MCI, SCC) applied to the EEG responses;
# complexity rises with impairment while brain rate falls.
_EEG_SHIFT = {"AD": (-1.5, 1.5), "MCI": (-0.8, 0.8), "SCC": (0.0, 0.0)}


def synthetic_patients(seed: int = 0) -> list[dict]:
    """160 synthetic patient records with the study's cell counts.

    EEG responses are normal with the per-diagnosis covariances above;
    SPECT responses are independent normals with a perfusion drop for AD.
    Not real data.
    """
    rng = np.random.default_rng(seed)
    rows = []
    pid = 0
    for (sex, age), counts in CELL_COUNTS.items():
        for diag, n in zip(DIAGNOSES, counts):
            br, cx = _EEG_SHIFT[diag]
            mean = np.array([br] * 3 + [cx] * 3) + 10.0
            eeg = rng.multivariate_normal(mean, DIAGNOSIS_COVARIANCES[diag], size=n)
            spect = rng.normal(60.0 - 4.0 * (diag == "AD"), 5.0, size=(n, 6))
            for e, s in zip(eeg, spect):
                pid += 1
                row = {"id": pid, "sex": sex, "age": age, "diagnosis": diag}
                row.update({c: round(float(v), 6) for c, v in zip(EEG_COLUMNS, e)})
                row.update({c: round(float(v), 6) for c, v in zip(SPECT_COLUMNS, s)})
                rows.append(row)
    return rows


def write_synthetic_csv(path, seed: int = 0) -> None:
    import csv

    rows = synthetic_patients(seed)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)

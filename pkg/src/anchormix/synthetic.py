"""Simulated allometry-style data with known group structure."""

from __future__ import annotations

import csv

import numpy as np

from .core import Dataset, center_predictor
from .numerics import as_rng


def simulate_mixreg(intercepts, slopes, sizes, noise_sd=0.3, x_loc=None, x_sd=2.0,
                    rng=None, center=True):
    """Draw points from separate regression lines.

    ``x_loc`` gives each group's mean raw predictor (default 0 for all).
    Returns ``(Dataset, true_labels)``; the Dataset's ``order`` holds
    ``"G<j>"`` group names.
    """
    gen = as_rng(rng).gen
    intercepts = np.asarray(intercepts, dtype=float)
    slopes = np.asarray(slopes, dtype=float)
    sizes = np.asarray(sizes, dtype=int)
    x_loc = np.zeros(len(sizes)) if x_loc is None else np.asarray(x_loc, dtype=float)
    labels = np.repeat(np.arange(len(sizes)), sizes)
    x = x_loc[labels] + x_sd * gen.standard_normal(labels.size)
    y = intercepts[labels] + slopes[labels] * x + noise_sd * gen.standard_normal(labels.size)
    offset = 0.0
    if center:
        offset = float(x.mean())
        x = center_predictor(x)
    names = [f"G{j}" for j in labels]
    species = [f"sp{i:03d}" for i in range(labels.size)]
    return Dataset(y, x, species, names, names, offset), labels


def write_csv(path, data: Dataset) -> None:
    """Write a Dataset in the species CSV schema (masses in grams, un-logged)."""
    body = np.exp(data.x[:, 1] + data.x_offset)
    brain = np.exp(data.y)
    species = data.species or [f"sp{i:03d}" for i in range(data.n)]
    order = data.order or ["NA"] * data.n
    suborder = data.suborder or order
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["species", "order", "suborder", "body_mass", "brain_mass"])
        for row in zip(species, order, suborder, body, brain):
            w.writerow([row[0], row[1], row[2], repr(float(row[3])), repr(float(row[4]))])

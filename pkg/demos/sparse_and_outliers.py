"""
Sparse reconstruction and gross sensor errors
=============================================

Reconstruct from a dictionary of raw training snapshots with basis
pursuit denoising, then break a few sensors and let the robust variant
separate them out.
"""

import numpy as np

from resrecon import Dictionary, NoiseModel, apply, center_library, generate_library, sparse_reconstruct
from resrecon import FieldGrid, StratificationParams, generate_snapshot
from resrecon.sensing import random_points
from resrecon.sparse import choose_epsilon

grid = FieldGrid.triangular()
base = StratificationParams(t_surface=22.0)
lib = center_library(generate_library(grid, base, 50, {"thermocline_depth": (8.0, 16.0), "t_surface": (18.0, 24.0)}, 1))
dictionary = Dictionary.from_library(lib)

truth = generate_snapshot(grid, base.replace(thermocline_depth=13.0, t_surface=20.5), label="test")
op = random_points(grid, 30, seed=3)
sigma = 0.1
eps = choose_epsilon(sigma, op.p)

# %%
# Clean sensors with a little Gaussian noise.
y = apply(op, truth, NoiseModel(sigma, seed=1))
res = sparse_reconstruct(dictionary, op, y, eps, truth=truth)
used = np.flatnonzero(np.abs(res.coefficients) > 1e-8)
print(f"BPDN: error1 {res.report.error1:.4f} using {used.size} of {dictionary.m} snapshots")

# %%
# Now three of the thirty sensors report garbage.
noise = NoiseModel(sigma, corruption_fraction=0.1, corruption_scale=10 * truth.values.std(), seed=2)
y_bad, corrupted = apply(op, truth, noise, return_corrupted=True)

plain = sparse_reconstruct(dictionary, op, y_bad, eps, truth=truth)
robust = sparse_reconstruct(dictionary, op, y_bad, eps, robust=True, truth=truth)
# e also soaks up a little Gaussian noise; flag what stands well above it
flagged = np.flatnonzero(np.abs(robust.outliers) > 10 * sigma)
print(f"plain BPDN error1  {plain.report.error1:.3g}")
print(f"robust error1      {robust.report.error1:.4f}")
print(f"corrupted sensors  {corrupted.tolist()}, flagged {flagged.tolist()}")

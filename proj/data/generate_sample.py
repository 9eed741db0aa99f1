#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Regenerates sample.csv, a small census-style table with planted biases.

gender is skewed (2:1), approval depends on gender, hours mediates part of
the gender effect on income, and a few cells are missing.
"""
import csv
import pathlib

import numpy as np

rng = np.random.default_rng(20240611)
n = 480

gender = rng.choice(["male", "female"], size=n, p=[2 / 3, 1 / 3])
race = rng.choice(["white", "black", "asian", "other"], size=n, p=[0.7, 0.15, 0.1, 0.05])
education = rng.choice(["hs", "college", "graduate"], size=n, p=[0.45, 0.4, 0.15])
age = np.clip(rng.normal(40, 11, size=n), 18, 80).round().astype(int)
male = (gender == "male").astype(float)
hours = np.clip(rng.normal(38 + 5 * male, 6), 10, 80).round(1)
income = (18000 + 650 * hours + 4000 * male + rng.normal(0, 6000, size=n)).round(0)
p_approve = 0.35 + 0.3 * male
approved = np.where(rng.random(n) < p_approve, "yes", "no")
score = (0.6 * (age - 40) / 11 + rng.normal(0, 1, size=n)).round(3)

rows = []
for i in range(n):
    rows.append([
        f"{age[i]}", gender[i], race[i], education[i], f"{hours[i]:.1f}",
        f"{int(income[i])}", approved[i], f"{score[i]:.3f}",
    ])
for i in rng.choice(n, size=12, replace=False):
    rows[i][rng.integers(0, 8)] = "NA"

out = pathlib.Path(__file__).with_name("sample.csv")
with out.open("w", newline="") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["age", "gender", "race", "education", "hours_per_week", "income", "approved", "score"])
    w.writerows(rows)

"""Binarize the UCI Adult data into the 123-feature a9a layout (LIBSVM text).

Continuous columns are quantized into quantile bins (age, fnlwgt, education-num,
hours-per-week: 5 bins; capital-gain, capital-loss: 2 bins), categorical
columns are one-hot encoded over their documented levels. Missing values ("?")
contribute no feature.

usage: adult_to_a9a.py adult.data out.txt [--rows N] [--seed S]
"""
import argparse
import random

import numpy as np

CATEGORICAL = {
    1: ["Private", "Self-emp-not-inc", "Self-emp-inc", "Federal-gov", "Local-gov",
        "State-gov", "Without-pay", "Never-worked"],
    3: ["Bachelors", "Some-college", "11th", "HS-grad", "Prof-school", "Assoc-acdm",
        "Assoc-voc", "9th", "7th-8th", "12th", "Masters", "1st-4th", "10th",
        "Doctorate", "5th-6th", "Preschool"],
    5: ["Married-civ-spouse", "Divorced", "Never-married", "Separated", "Widowed",
        "Married-spouse-absent", "Married-AF-spouse"],
    6: ["Tech-support", "Craft-repair", "Other-service", "Sales", "Exec-managerial",
        "Prof-specialty", "Handlers-cleaners", "Machine-op-inspct", "Adm-clerical",
        "Farming-fishing", "Transport-moving", "Priv-house-serv", "Protective-serv",
        "Armed-Forces"],
    7: ["Wife", "Own-child", "Husband", "Not-in-family", "Other-relative", "Unmarried"],
    8: ["White", "Asian-Pac-Islander", "Amer-Indian-Eskimo", "Other", "Black"],
    9: ["Female", "Male"],
    13: ["United-States", "Cambodia", "England", "Puerto-Rico", "Canada", "Germany",
         "Outlying-US(Guam-USVI-etc)", "India", "Japan", "Greece", "South", "China",
         "Cuba", "Iran", "Honduras", "Philippines", "Italy", "Poland", "Jamaica",
         "Vietnam", "Mexico", "Portugal", "Ireland", "France", "Dominican-Republic",
         "Laos", "Ecuador", "Taiwan", "Haiti", "Columbia", "Hungary", "Guatemala",
         "Nicaragua", "Scotland", "Thailand", "Yugoslavia", "El-Salvador",
         "Trinadad&Tobago", "Peru", "Hong", "Holand-Netherlands"],
}
CONTINUOUS = {0: 5, 2: 5, 4: 5, 10: 2, 11: 2, 12: 5}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("adult")
    ap.add_argument("out")
    ap.add_argument("--rows", type=int, default=0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    records = []
    with open(args.adult) as fh:
        for line in fh:
            cols = [c.strip() for c in line.strip().rstrip(".").split(",")]
            if len(cols) == 15:
                records.append(cols)

    edges = {}
    for col, bins in CONTINUOUS.items():
        vals = np.array([float(r[col]) for r in records])
        if bins == 2:
            edges[col] = [0.0]  # zero vs positive
        else:
            edges[col] = list(np.quantile(vals, np.linspace(0, 1, bins + 1)[1:-1]))

    layout = []
    for col in range(14):
        if col in CONTINUOUS:
            layout.append((col, CONTINUOUS[col]))
        elif col in CATEGORICAL:
            layout.append((col, len(CATEGORICAL[col])))
    assert sum(w for _, w in layout) == 123

    if args.rows:
        random.Random(args.seed).shuffle(records)
        records = records[: args.rows]

    with open(args.out, "w") as out:
        for r in records:
            label = "+1" if r[14].startswith(">50K") else "-1"
            feats = []
            base = 1
            for col, width in layout:
                if col in CONTINUOUS:
                    v = float(r[col])
                    feats.append(base + int(np.searchsorted(edges[col], v, side="right")))
                elif r[col] in CATEGORICAL[col]:
                    feats.append(base + CATEGORICAL[col].index(r[col]))
                base += width
            out.write(label + " " + " ".join(f"{i}:1" for i in feats) + "\n")


if __name__ == "__main__":
    main()

"""Recompute the headline numbers implied by the published confusion rates and network layout.

The per-class test size of 75 (15 per rotation, five rotations) turns each rate
into an integer count; accuracy and mean recall follow from those counts.
"""
import numpy as np

from binscan.nn import ModelSpec
from binscan.trainer import ConfusionMatrix

TWO_CLASS = (["benign", "malicious"], [[94.67, 5.33], [6.67, 93.33]])
THREE_CLASS = (["benign", "gafgyt", "mirai"], [[94.67, 2.67, 2.67], [6.67, 72.00, 21.33], [0.0, 21.33, 78.67]])
PER_CLASS = 75


def show(names, rates):
    cm = ConfusionMatrix.from_rates(names, rates, per_row=PER_CLASS)
    print(cm.format())
    print(f"counts {cm.counts.tolist()}")
    print(f"accuracy {100 * cm.accuracy():.2f}%   mean diagonal {cm.mean_diagonal_rate():.2f}%   "
          f"mean of published diagonal {np.mean(np.diag(rates)):.2f}%\n")


def main():
    show(*TWO_CLASS)
    show(*THREE_CLASS)
    spec = ModelSpec(classes=3)
    for row in spec.describe():
        print(row)
    print(f"conv nodes {spec.conv_nodes}  flatten {spec.flatten_size}")
    for name, shape in spec.param_shapes().items():
        print(f"  {name:8s} {str(shape):20s} {int(np.prod(shape)):>9,d}")
    print(f"parameters {spec.param_count():,d} (3 classes), {ModelSpec(classes=2).param_count():,d} (2 classes)")


if __name__ == "__main__":
    main()

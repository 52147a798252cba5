"""Seeded synthetic datasets: long-tailed ID, imbalanced auxiliary OOD, test OOD.

The desk-scale benchmark lives in 2-D so every experiment can be replotted
and audited by eye: K Gaussian ID classes on a circle with exponentially
decaying class sizes, an auxiliary OOD cloud displaced off the class means
with a known class affinity, and a test OOD ring far outside ID support.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, InvalidArgument, ParseError

ROLES = ("id_train", "id_test", "ood_aux", "ood_test")


@dataclass
class DatasetSpec:
    """Geometry and size of the synthetic ID benchmark."""

    D: int = 2
    K: int = 5
    n_head: int = 1000
    rho: float = 100.0
    class_means: np.ndarray = None
    class_scale: float = 0.6
    n_test_per_class: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.K < 2:
            raise InvalidArgument(f"K must be at least 2, got {self.K}")
        if self.D < 1:
            raise InvalidArgument(f"D must be positive, got {self.D}")
        if self.rho < 1.0:
            raise InvalidArgument(f"imbalance ratio must be >= 1, got {self.rho}")
        if self.n_head < 1 or self.n_test_per_class < 1:
            raise InvalidArgument("class sizes must be positive")
        if not self.class_scale > 0:
            raise InvalidArgument(f"class_scale must be positive, got {self.class_scale}")
        if self.class_means is None:
            self.class_means = circle_means(self.K, radius=4.0)
        self.class_means = np.asarray(self.class_means, dtype=np.float64)
        if self.class_means.shape != (self.K, self.D):
            raise InvalidArgument(
                f"class_means shape {self.class_means.shape} != ({self.K}, {self.D})")


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    role: str

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.role not in ROLES:
            raise InvalidArgument(f"unknown dataset role {self.role!r}")
        if self.features.ndim != 2 or self.labels.shape != (self.features.shape[0],):
            raise InvalidArgument("features must be N x D with one label per row")
        if self.role.startswith("id_"):
            if self.labels.size and self.labels.min() < 0:
                raise InvalidArgument(f"role {self.role} cannot contain label -1")
        elif self.labels.size and not np.all(self.labels == -1):
            raise InvalidArgument(f"role {self.role} must be all label -1")

    @property
    def n(self):
        return self.features.shape[0]


def circle_means(K, radius=4.0):
    """K well-separated 2-D class centers, evenly spaced on a circle."""
    angles = 2.0 * math.pi * np.arange(K) / K
    return radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)


def class_sizes(K, n_head, rho):
    """Long-tail rule: n_i = round(n_head * rho^(-i/(K-1)))."""
    sizes = [int(round(n_head * rho ** (-i / (K - 1)))) for i in range(K)]
    if sizes[-1] < 1:
        raise InvalidArgument(
            f"tail class rounds to {sizes[-1]} samples; raise n_head or lower rho")
    return sizes


def gen_longtail_id(spec):
    """Long-tailed train split plus a balanced test split, one seed each."""
    sizes = class_sizes(spec.K, spec.n_head, spec.rho)
    ss_train, ss_test = np.random.SeedSequence(spec.seed).spawn(2)

    def draw(rng, counts):
        feats, labs = [], []
        for i, n_i in enumerate(counts):
            feats.append(rng.normal(spec.class_means[i], spec.class_scale,
                                    size=(n_i, spec.D)))
            labs.append(np.full(n_i, i, dtype=np.int64))
        return np.concatenate(feats), np.concatenate(labs)

    x_tr, y_tr = draw(np.random.default_rng(ss_train), sizes)
    x_te, y_te = draw(np.random.default_rng(ss_test), [spec.n_test_per_class] * spec.K)
    return (Dataset(x_tr, y_tr, "id_train"), Dataset(x_te, y_te, "id_test"))


def gen_auxiliary_ood(spec, affinity, n, offset_scale, seed):
    """Class-imbalanced OOD cloud near the ID classes.

    Each point picks a class by the affinity vector, then samples a Gaussian
    whose center is that class mean pushed offset_scale along a random unit
    direction. The affinity is the ground-truth imbalance the prior
    estimation step should recover.
    """
    a = np.asarray(affinity, dtype=np.float64)
    if a.shape != (spec.K,) or a.min() < 0 or abs(a.sum() - 1.0) > 1e-9:
        raise InvalidArgument("affinity must be a length-K probability vector")
    if n < 1:
        raise EmptyInput(f"need at least one auxiliary sample, got n={n}")
    if offset_scale < 0:
        raise InvalidArgument(f"offset_scale must be nonnegative, got {offset_scale}")
    rng = np.random.default_rng(seed)
    cls = rng.choice(spec.K, size=n, p=a)
    u = rng.normal(size=(n, spec.D))
    u /= np.maximum(np.linalg.norm(u, axis=1, keepdims=True), 1e-300)
    centers = spec.class_means[cls] + offset_scale * u
    x = centers + rng.normal(0.0, spec.class_scale, size=(n, spec.D))
    return Dataset(x, np.full(n, -1, dtype=np.int64), "ood_aux")


def gen_test_ood(D, n, regime, params, seed):
    """Disjoint test-time OOD: a far hyper-box or a sphere shell.

    params: far_uniform wants {"low", "high"} (scalars or length-D),
    ring wants {"radius"} and optionally {"center"} (default origin).
    """
    if n < 1:
        raise EmptyInput(f"need at least one test OOD sample, got n={n}")
    rng = np.random.default_rng(seed)
    if regime == "far_uniform":
        try:
            low = np.broadcast_to(np.asarray(params["low"], dtype=np.float64), (D,))
            high = np.broadcast_to(np.asarray(params["high"], dtype=np.float64), (D,))
        except KeyError as exc:
            raise InvalidArgument(f"far_uniform needs {exc.args[0]!r}") from None
        if not np.all(low < high):
            raise InvalidArgument("far_uniform needs low < high per coordinate")
        x = rng.uniform(low, high, size=(n, D))
    elif regime == "ring":
        if "radius" not in params:
            raise InvalidArgument("ring needs 'radius'")
        radius = float(params["radius"])
        if radius < 0:
            raise InvalidArgument(f"radius must be nonnegative, got {radius}")
        center = np.broadcast_to(
            np.asarray(params.get("center", 0.0), dtype=np.float64), (D,))
        u = rng.normal(size=(n, D))
        u /= np.maximum(np.linalg.norm(u, axis=1, keepdims=True), 1e-300)
        x = center + radius * u
    else:
        raise InvalidArgument(f"unknown test OOD regime {regime!r}")
    return Dataset(x, np.full(n, -1, dtype=np.int64), "ood_test")


def default_affinity(spec):
    """Auxiliary class affinity proportional to the ID training class sizes."""
    sizes = np.array(class_sizes(spec.K, spec.n_head, spec.rho), dtype=np.float64)
    return sizes / sizes.sum()


def save_csv(dataset, path):
    """Header x0..x{D-1},label then one row per sample, floats at 17 digits."""
    d = dataset.features.shape[1]
    cols = [f"x{i}" for i in range(d)] + ["label"]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for row, lab in zip(dataset.features, dataset.labels):
            fh.write(",".join(format(v, ".17g") for v in row) + f",{lab}\n")


def load_csv(path, role=None):
    """Parse a dataset CSV; value-exact inverse of save_csv.

    role is inferred from the labels when omitted (all -1 means ood_aux).
    Malformed rows raise ParseError carrying the 1-based line number.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise EmptyInput(f"{path} is empty")
    header = lines[0].split(",")
    d = len(header) - 1
    if d < 1 or header[-1] != "label" or header[:-1] != [f"x{i}" for i in range(d)]:
        raise ParseError(f"bad header {lines[0]!r}", line=1)
    if len(lines) == 1:
        raise EmptyInput(f"{path} has a header but no samples")
    feats = np.empty((len(lines) - 1, d))
    labs = np.empty(len(lines) - 1, dtype=np.int64)
    for i, text in enumerate(lines[1:]):
        lineno = i + 2
        parts = text.split(",")
        if len(parts) != d + 1:
            raise ParseError(f"expected {d + 1} columns, got {len(parts)}", line=lineno)
        try:
            feats[i] = [float(p) for p in parts[:-1]]
            labs[i] = int(parts[-1])
        except ValueError:
            raise ParseError(f"unparseable value in {text!r}", line=lineno) from None
        if labs[i] < -1:
            raise ParseError(f"label {labs[i]} outside {{-1, 0, 1, ...}}", line=lineno)
    if role is None:
        role = "ood_aux" if bool(np.all(labs == -1)) else "id_train"
    return Dataset(feats, labs, role)

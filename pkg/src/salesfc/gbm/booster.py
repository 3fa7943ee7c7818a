"""Boosting loop, prediction and the text model format."""
from __future__ import annotations

import io
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..errors import ConfigError, DataValueError, ShapeError
from .binning import BinMapper
from .goss import goss_sample
from .loss import make_loss
from .tree import Tree, grow_tree

FORMAT_HEADER = "salesfc-gbm"
FORMAT_VERSION = 1


@dataclass
class GBMParams:
    loss: str = "tweedie"
    tweedie_power: float = 1.5
    rounds: int = 300
    learning_rate: float = 0.1
    max_leaves: int = 31
    max_depth: int = -1
    min_data_in_leaf: int = 20
    min_sum_hessian: float = 1e-3
    lambda_l2: float = 1.0
    min_split_gain: float = 0.0
    bins: int = 63
    goss: bool = False
    top_rate: float = 0.2
    other_rate: float = 0.1
    seed: int = 0

    def validate(self) -> "GBMParams":
        make_loss(self.loss, self.tweedie_power)
        if self.rounds < 1:
            raise ConfigError(f"rounds must be >= 1, got {self.rounds}", key="gbm.rounds")
        if not 0 < self.learning_rate <= 1:
            raise ConfigError(f"learning_rate must be in (0, 1], got {self.learning_rate}",
                              key="gbm.learning_rate")
        if self.max_leaves < 2:
            raise ConfigError("max_leaves must be >= 2", key="gbm.max_leaves")
        if self.min_data_in_leaf < 1:
            raise ConfigError("min_data_in_leaf must be >= 1", key="gbm.min_data_in_leaf")
        if self.lambda_l2 < 0:
            raise ConfigError("lambda_l2 must be >= 0", key="gbm.lambda_l2")
        if self.goss and (self.top_rate <= 0 or self.other_rate <= 0
                          or self.top_rate + self.other_rate > 1):
            raise ConfigError("GOSS rates need 0 < a, 0 < b, a + b <= 1", key="gbm.goss")
        return self


@dataclass
class BoostedModel:
    trees: list
    base_score: float
    learning_rate: float
    loss: str
    tweedie_power: Optional[float]
    feature_names: list
    train_loss: list = field(default_factory=list)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def raw_predict(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ShapeError(f"model expects {self.n_features} features, got shape {X.shape}")
        raw = np.full(len(X), self.base_score)
        for tree in self.trees:
            raw += self.learning_rate * tree.predict(X)
        return raw

    def predict(self, X) -> np.ndarray:
        raw = self.raw_predict(X)
        return np.exp(raw) if self.loss == "tweedie" else raw

    def dumps(self) -> str:
        out = io.StringIO()
        w = out.write
        w(f"{FORMAT_HEADER} {FORMAT_VERSION}\n")
        w(f"loss {self.loss}\n")
        w(f"tweedie_power {float.hex(float(self.tweedie_power or 0.0))}\n")
        w(f"base_score {float.hex(float(self.base_score))}\n")
        w(f"learning_rate {float.hex(float(self.learning_rate))}\n")
        w("feature_names " + "\t".join(self.feature_names) + "\n")
        w(f"n_trees {len(self.trees)}\n")
        for k, tree in enumerate(self.trees):
            t = tree.preorder()
            w(f"tree {k} {t.n_nodes}\n")
            for i in range(t.n_nodes):
                if t.is_leaf[i]:
                    w(f"leaf {float.hex(float(t.value[i]))}\n")
                else:
                    w(f"split {int(t.feature[i])} {float.hex(float(t.threshold[i]))} "
                      f"{'L' if t.missing_left[i] else 'R'} {int(t.left[i])} {int(t.right[i])}\n")
        w("end\n")
        return out.getvalue()

    @classmethod
    def loads(cls, text: str) -> "BoostedModel":
        lines = iter(text.splitlines())
        head = next(lines).split()
        if head[0] != FORMAT_HEADER or int(head[1]) != FORMAT_VERSION:
            raise DataValueError(f"not a {FORMAT_HEADER} v{FORMAT_VERSION} model: {head}")

        def field_(name):
            line = next(lines)
            key, _, val = line.partition(" ")
            if key != name:
                raise DataValueError(f"model file: expected {name!r}, found {key!r}")
            return val

        loss = field_("loss")
        power = float.fromhex(field_("tweedie_power"))
        base = float.fromhex(field_("base_score"))
        lr = float.fromhex(field_("learning_rate"))
        names_raw = field_("feature_names")
        names = names_raw.split("\t") if names_raw else []
        trees = []
        for _ in range(int(field_("n_trees"))):
            _, _, n = next(lines).split()
            n = int(n)
            feat = np.zeros(n, np.int64)
            thr = np.zeros(n)
            ml = np.ones(n, np.bool_)
            left = np.full(n, -1, np.int64)
            right = np.full(n, -1, np.int64)
            val = np.zeros(n)
            leaf = np.zeros(n, np.bool_)
            for i in range(n):
                parts = next(lines).split()
                if parts[0] == "leaf":
                    leaf[i] = True
                    val[i] = float.fromhex(parts[1])
                else:
                    feat[i] = int(parts[1])
                    thr[i] = float.fromhex(parts[2])
                    ml[i] = parts[3] == "L"
                    left[i], right[i] = int(parts[4]), int(parts[5])
            trees.append(Tree(feat, thr, ml, left, right, val, leaf))
        return cls(trees, base, lr, loss, power if loss == "tweedie" else None, names)

    def save(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> "BoostedModel":
        with open(path) as fh:
            return cls.loads(fh.read())


def train(X, y, params: GBMParams | dict | None = None,
          feature_names: Optional[Sequence[str]] = None) -> BoostedModel:
    if params is None:
        params = GBMParams()
    elif isinstance(params, dict):
        params = GBMParams(**params)
    params.validate()
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or len(X) != len(y) or len(y) == 0:
        raise ShapeError(f"need a non-empty (n, f) matrix matching {len(y)} labels, got {X.shape}")
    if X.shape[1] == 0:
        raise ShapeError("feature matrix has no columns")
    if np.isinf(X).any():
        r, c = np.argwhere(np.isinf(X))[0]
        raise DataValueError(f"infinite feature value at row {r}, feature {c}", int(r), int(c))
    if not np.isfinite(y).all():
        raise DataValueError(f"non-finite label at row {int(np.flatnonzero(~np.isfinite(y))[0])}")
    loss = make_loss(params.loss, params.tweedie_power)
    if loss.name == "tweedie" and (y < 0).any():
        raise DataValueError("Tweedie loss needs non-negative labels")
    names = list(feature_names) if feature_names is not None else \
        [f"f{j}" for j in range(X.shape[1])]
    if len(names) != X.shape[1]:
        raise ShapeError(f"{len(names)} feature names for {X.shape[1]} columns")

    mapper = BinMapper(params.bins).fit(X)
    binned = mapper.transform(X)
    n_bins = mapper.n_bins
    base = loss.base_score(y)
    raw = np.full(len(y), base)
    all_rows = np.arange(len(y), dtype=np.int64)
    history = [loss.mean_loss(y, raw)]
    trees = []
    for it in range(params.rounds):
        grad, hess = loss.grad_hess(y, raw)
        rows = all_rows
        if params.goss:
            rows, w = goss_sample(grad, params.top_rate, params.other_rate,
                                  seed=(params.seed, it))
            grad = grad.copy()
            hess = hess.copy()
            grad[rows] *= w
            hess[rows] *= w
        tree = grow_tree(
            binned, grad, hess, rows, mapper.edges, n_bins, mapper.missing_bin,
            lambda_l2=params.lambda_l2, max_leaves=params.max_leaves,
            max_depth=params.max_depth, min_data_in_leaf=params.min_data_in_leaf,
            min_sum_hessian=params.min_sum_hessian, min_split_gain=params.min_split_gain,
        )
        raw += params.learning_rate * tree.predict_binned(binned, mapper.missing_bin)
        trees.append(tree)
        history.append(loss.mean_loss(y, raw))
    return BoostedModel(trees, base, params.learning_rate, loss.name,
                        params.tweedie_power if loss.name == "tweedie" else None, names, history)


def predict(model: BoostedModel, X) -> np.ndarray:
    return model.predict(X)


def params_dict(params: GBMParams) -> dict:
    return asdict(params)

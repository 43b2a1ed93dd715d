"""Named finite variable spaces and dense probability tables.

Conventions used throughout the library:

- a :class:`JointTable` is a dense tensor with one axis per variable, axes
  ordered as the space lists them;
- a :class:`ConditionalTable` is a column-stochastic matrix, rows indexed by
  output cells and columns by input cells, both flattened row-major;
- normalization is checked at tolerance ``NORM_TOL`` (1e-9) and equality
  assertions use ``EQ_TOL`` (1e-10); zero-probability cells raise, they are
  never smoothed away silently.
"""

import json
from dataclasses import dataclass
from itertools import product as _iter_product
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InputError, ZeroProbabilityError

NORM_TOL = 1e-9
EQ_TOL = 1e-10
_NEG_CLAMP = 1e-12

_EINSUM_LETTERS = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"


def _freeze_label(value):
    # JSON round-trips turn tuples into lists; normalize back to hashables
    if isinstance(value, list):
        return tuple(_freeze_label(v) for v in value)
    return value


@dataclass(frozen=True)
class VariableSpace:
    """Ordered list of (name, range) pairs with label/index maps."""

    variables: tuple

    def __post_init__(self):
        vs = tuple((str(name), tuple(_freeze_label(v) for v in rng)) for name, rng in self.variables)
        object.__setattr__(self, "variables", vs)
        names = [name for name, _ in vs]
        if len(set(names)) != len(names):
            raise InputError(f"duplicate variable names in {names}")
        for name, rng in vs:
            if len(rng) == 0:
                raise InputError(f"variable {name!r} has an empty range")
            if len(set(rng)) != len(rng):
                raise InputError(f"variable {name!r} has duplicate labels in its range")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, Sequence]]) -> "VariableSpace":
        return cls(tuple((name, tuple(rng)) for name, rng in pairs))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.variables)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(rng) for _, rng in self.variables)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape)) if self.variables else 1

    def axis(self, name: str) -> int:
        for i, (n, _) in enumerate(self.variables):
            if n == name:
                return i
        raise InputError(f"unknown variable {name!r}; space has {self.names}")

    def range_of(self, name: str) -> tuple:
        return self.variables[self.axis(name)][1]

    def index(self, name: str, label) -> int:
        rng = self.range_of(name)
        label = _freeze_label(label)
        try:
            return rng.index(label)
        except ValueError:
            raise InputError(f"label {label!r} not in range of {name!r}: {rng}") from None

    def subspace(self, names: Iterable[str]) -> "VariableSpace":
        wanted = set(names)
        unknown = wanted - set(self.names)
        if unknown:
            raise InputError(f"unknown variables {sorted(unknown)}; space has {self.names}")
        return VariableSpace(tuple(v for v in self.variables if v[0] in wanted))

    def cells(self):
        """Iterate over label tuples in row-major order."""
        return _iter_product(*(rng for _, rng in self.variables))

    def to_jsonable(self) -> list:
        return [{"name": n, "range": list(r)} for n, r in self.variables]

    @classmethod
    def from_jsonable(cls, data) -> "VariableSpace":
        return cls.from_pairs((d["name"], d["range"]) for d in data)


def _clean_probs(arr: np.ndarray, what: str) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{what} contains non-finite entries")
    if arr.size and arr.min() < -_NEG_CLAMP:
        raise InputError(f"{what} has negative entries (min {arr.min():.3e})")
    np.clip(arr, 0.0, None, out=arr)
    return arr


@dataclass(frozen=True, eq=False)
class JointTable:
    """Probability tensor over a :class:`VariableSpace`.

    ``normalized=False`` relaxes the mass check to "sum <= 1", for
    sub-probability slices such as P(z, a, Y_S) at fixed z, a.
    """

    space: VariableSpace
    probs: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        arr = _clean_probs(self.probs, "joint table")
        if self.space.variables:
            expected = self.space.shape
        else:
            expected = ()
        if arr.shape != expected:
            raise InputError(f"probs shape {arr.shape} does not match space shape {expected}")
        total = float(arr.sum())
        if self.normalized:
            if abs(total - 1.0) > NORM_TOL:
                raise InputError(f"joint table mass {total!r} is not 1 within {NORM_TOL}")
        elif total > 1.0 + NORM_TOL:
            raise InputError(f"sub-probability table mass {total!r} exceeds 1")
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    @property
    def mass(self) -> float:
        return float(self.probs.sum())

    def prob(self, assignment: Mapping[str, object]) -> float:
        idx = tuple(self.space.index(name, assignment[name]) for name in self.space.names)
        return float(self.probs[idx])

    def to_jsonable(self) -> dict:
        return {"variables": self.space.to_jsonable(), "probs": self.probs.ravel(order="C").tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_jsonable())

    @classmethod
    def from_jsonable(cls, data, normalized: bool = True) -> "JointTable":
        space = VariableSpace.from_jsonable(data["variables"])
        arr = np.asarray(data["probs"], dtype=float).reshape(space.shape)
        return cls(space, arr, normalized=normalized)

    @classmethod
    def from_json(cls, text: str, normalized: bool = True) -> "JointTable":
        return cls.from_jsonable(json.loads(text), normalized=normalized)


@dataclass(frozen=True, eq=False)
class ConditionalTable:
    """Column-stochastic channel P(out | in) over two disjoint spaces."""

    space_in: VariableSpace
    space_out: VariableSpace
    matrix: np.ndarray

    def __post_init__(self):
        overlap = set(self.space_in.names) & set(self.space_out.names)
        if overlap:
            raise InputError(f"input and output spaces share variables {sorted(overlap)}")
        arr = _clean_probs(self.matrix, "conditional table")
        expected = (self.space_out.size, self.space_in.size)
        if arr.shape != expected:
            raise InputError(f"matrix shape {arr.shape} does not match (out, in) sizes {expected}")
        colsums = arr.sum(axis=0)
        if np.any(np.abs(colsums - 1.0) > NORM_TOL):
            j = int(np.argmax(np.abs(colsums - 1.0)))
            raise InputError(f"column {j} sums to {colsums[j]!r}, not 1 within {NORM_TOL}")
        arr.setflags(write=False)
        object.__setattr__(self, "matrix", arr)

    def tensor(self) -> np.ndarray:
        """Reshape to one axis per variable: out axes first, then in axes."""
        return self.matrix.reshape(self.space_out.shape + self.space_in.shape)

    @staticmethod
    def _flat_index(space: VariableSpace, labels) -> int:
        # single-variable spaces take the bare label (which may be a tuple)
        if len(space.names) == 1:
            labels = (labels,)
        elif not isinstance(labels, tuple) or len(labels) != len(space.names):
            raise InputError(f"expected one label per variable in {space.names}, got {labels!r}")
        idx = tuple(space.index(n, v) for n, v in zip(space.names, labels))
        return int(np.ravel_multi_index(idx, space.shape))

    def column(self, in_labels) -> np.ndarray:
        return self.matrix[:, self._flat_index(self.space_in, in_labels)]

    def column_at(self, assignment: Mapping[str, object]) -> np.ndarray:
        """Column lookup by variable name, independent of axis order."""
        names = self.space_in.names
        labels = assignment[names[0]] if len(names) == 1 else tuple(assignment[n] for n in names)
        return self.column(labels)

    def prob(self, out_labels, in_labels) -> float:
        return float(self.column(in_labels)[self._flat_index(self.space_out, out_labels)])

    def to_jsonable(self) -> dict:
        return {
            "inputs": self.space_in.to_jsonable(),
            "outputs": self.space_out.to_jsonable(),
            "matrix": self.matrix.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_jsonable())

    @classmethod
    def from_jsonable(cls, data) -> "ConditionalTable":
        return cls(
            VariableSpace.from_jsonable(data["inputs"]),
            VariableSpace.from_jsonable(data["outputs"]),
            np.asarray(data["matrix"], dtype=float),
        )

    @classmethod
    def from_json(cls, text: str) -> "ConditionalTable":
        return cls.from_jsonable(json.loads(text))


def marginalize(j: JointTable, keep: Iterable[str]) -> JointTable:
    """Sum out every variable not in ``keep``; mass is preserved."""
    keep = set(keep)
    sub = j.space.subspace(keep)  # validates names
    drop_axes = tuple(i for i, n in enumerate(j.space.names) if n not in keep)
    arr = j.probs.sum(axis=drop_axes) if drop_axes else j.probs
    return JointTable(sub, arr, normalized=j.normalized)


def condition(j: JointTable, given: Iterable[str], *, uniform_fill: bool = False) -> ConditionalTable:
    """Divide by the marginal over ``given``.

    A zero-probability conditioning cell raises :class:`ZeroProbabilityError`
    naming the cell; with ``uniform_fill=True`` that column becomes uniform
    instead.
    """
    given = set(given)
    space_in = j.space.subspace(given)
    out_names = [n for n in j.space.names if n not in given]
    if not out_names:
        raise InputError("conditioning on every variable leaves nothing to predict")
    space_out = j.space.subspace(out_names)

    in_axes = tuple(j.space.axis(n) for n in space_in.names)
    out_axes = tuple(j.space.axis(n) for n in space_out.names)
    arr = np.transpose(j.probs, out_axes + in_axes).reshape(space_out.size, space_in.size)
    marg = arr.sum(axis=0)
    zero = marg <= 0.0
    if np.any(zero):
        if not uniform_fill:
            flat = int(np.argmax(zero))
            cell = tuple(np.unravel_index(flat, space_in.shape)) if space_in.variables else ()
            labels = tuple(rng[i] for (_, rng), i in zip(space_in.variables, cell))
            raise ZeroProbabilityError(dict(zip(space_in.names, labels)))
        arr = arr.copy()
        arr[:, zero] = 1.0 / space_out.size
        marg = np.where(zero, 1.0, marg)
    return ConditionalTable(space_in, space_out, arr / marg)


def extend(j: JointTable, channel: ConditionalTable) -> JointTable:
    """Product ``p(u) * channel(o | u_in)`` over the union of variables.

    The channel's input variables must already be in ``j``; its output
    variables are appended after ``j``'s, in the channel's order.  This is the
    inverse of :func:`condition` composed with :func:`marginalize`.
    """
    for name in channel.space_in.names:
        if name not in j.space.names:
            raise InputError(f"channel input {name!r} missing from joint {j.space.names}")
    for name in channel.space_out.names:
        if name in j.space.names:
            raise InputError(f"channel output {name!r} already present in joint")

    letters = {}
    for name in j.space.names + channel.space_out.names:
        letters[name] = _EINSUM_LETTERS[len(letters)]
    j_sub = "".join(letters[n] for n in j.space.names)
    c_sub = "".join(letters[n] for n in channel.space_out.names + channel.space_in.names)
    out_sub = j_sub + "".join(letters[n] for n in channel.space_out.names)
    arr = np.einsum(f"{j_sub},{c_sub}->{out_sub}", j.probs, channel.tensor())
    space = VariableSpace(j.space.variables + channel.space_out.variables)
    return JointTable(space, arr, normalized=j.normalized)


def reorder(j: JointTable, names: Sequence[str]) -> JointTable:
    """Permute axes to the given variable order."""
    names = tuple(names)
    if set(names) != set(j.space.names) or len(names) != len(j.space.names):
        raise InputError(f"{names} is not a permutation of {j.space.names}")
    perm = tuple(j.space.axis(n) for n in names)
    space = VariableSpace(tuple(j.space.variables[i] for i in perm))
    return JointTable(space, np.transpose(j.probs, perm), normalized=j.normalized)

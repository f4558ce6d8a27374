"""Instance generators and file formats for the two experiment families.

Transportation: ``I`` suppliers with capacities ship to ``D`` customers with
random demand; one chance constraint per customer.

Building load: ``n`` buildings whose HVAC on/off switches absorb random PV
output, solved one period at a time; the room temperature follows
``x_t = A x_{t-1} + B u_t + G v`` and the comfort cost is ``|x_t - x_ref|``.
The thermal parameters are synthetic defaults (see ``BUILDING_DEFAULTS``).

JSON schema v1 (``"schema": 1``) stores either family; demand samples may be
given inline or as CSV files with one column ``xi``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Union

import jsonschema
import numpy as np

from .model import LinRow
from .reformulate.instance import ChanceConstraint, DrccInstance
from .samples import RiskBounds, RiskCost, SampleSet, var_point

SCHEMA_VERSION = 1

TRANSPORT_DEFAULTS = dict(
    alpha_bar=0.3,
    alpha_min=1e-6,
    epsilon=0.05,
    p=1e6,
    p_jitter=100.0,
    demand_mu=3.0,
    demand_sigma=0.4,
    demand_scale=100.0,
    capacity_factor=1.5,
)

BUILDING_DEFAULTS = dict(
    alpha_bar=0.3,
    alpha_min=1e-6,
    epsilon=0.02,
    p=20.0,
    a_range=(0.85, 0.97),
    b_range=(-1.6, -0.8),
    steady_range=(28.0, 32.0),
    v_range=(27.0, 33.0),
    power_range=(3.0, 8.0),
    x_min=20.0,
    x_max=26.0,
    x_ref=22.5,
    c_sys=1.0,
    c_switch=0.5,
    pv_peak=0.45,
    pv_noise=0.25,
)


class InstanceSchemaError(ValueError):
    """Malformed instance file; the message names the offending field."""


# ---------------------------------------------------------------------------
# transportation
# ---------------------------------------------------------------------------


@dataclass
class TransportationInstance:
    capacities: np.ndarray  # (I,)
    costs: np.ndarray  # (I, D)
    demand: list  # D arrays of samples
    penalties: np.ndarray  # (D,) risk cost per unit tolerance
    epsilon: float = 0.05
    alpha_bar: float = 0.3
    alpha_min: float = 1e-6
    name: str = "transportation"
    seed: Optional[int] = None

    def __post_init__(self):
        self.capacities = np.asarray(self.capacities, dtype=float)
        self.costs = np.atleast_2d(np.asarray(self.costs, dtype=float))
        self.penalties = np.asarray(self.penalties, dtype=float)
        self.demand = [np.asarray(d, dtype=float) for d in self.demand]
        i, d = self.costs.shape
        if self.capacities.shape != (i,):
            raise ValueError(f"capacities has shape {self.capacities.shape}, expected ({i},)")
        if len(self.demand) != d or self.penalties.shape != (d,):
            raise ValueError("need one demand sample set and one penalty per customer")
        if np.any(self.capacities < 0) or np.any(self.costs < 0):
            raise ValueError("capacities and costs must be nonnegative")

    @property
    def suppliers(self) -> int:
        return int(self.costs.shape[0])

    @property
    def customers(self) -> int:
        return int(self.costs.shape[1])

    @property
    def n_samples(self) -> int:
        return int(max(len(d) for d in self.demand))

    def sample_sets(self) -> list[SampleSet]:
        return [SampleSet(d, self.epsilon) for d in self.demand]

    def bounds(self) -> RiskBounds:
        return RiskBounds(self.alpha_bar, self.alpha_min)

    def to_drcc(self) -> DrccInstance:
        n_i, n_d = self.costs.shape
        names = [f"x_{i + 1}_{j + 1}" for i in range(n_i) for j in range(n_d)]

        def col(i, j):
            return i * n_d + j

        rows = [LinRow({col(i, j): 1.0 for j in range(n_d)}, "<=", float(self.capacities[i]), f"cap_{i + 1}") for i in range(n_i)]
        ccs = [
            ChanceConstraint({col(i, j): 1.0 for i in range(n_i)}, s, RiskCost("linear", float(self.penalties[j])), f"d{j + 1}")
            for j, s in enumerate(self.sample_sets())
        ]
        d = len(names)
        return DrccInstance(
            names,
            self.costs.reshape(-1),
            np.zeros(d),
            np.full(d, math.inf),
            np.zeros(d, dtype=bool),
            rows,
            ccs,
            self.bounds(),
            name=self.name,
        )

    def feasible_at_alpha_bar(self) -> bool:
        """Total capacity covers every customer's worst-case VaR at ``alpha_bar``."""
        need = sum(var_point(s, self.alpha_bar).continuous for s in self.sample_sets())
        return need <= float(self.capacities.sum()) + 1e-9

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "type": "transportation",
            "name": self.name,
            "seed": self.seed,
            "epsilon": self.epsilon,
            "alpha_bar": self.alpha_bar,
            "alpha_min": self.alpha_min,
            "capacities": self.capacities.tolist(),
            "costs": self.costs.tolist(),
            "penalties": self.penalties.tolist(),
            "demand_samples": [d.tolist() for d in self.demand],
        }


def gen_transportation(seed: int, I: int, D: int, N: int, **overrides) -> TransportationInstance:
    """Random transportation instance.

    Suppliers and customers sit at uniform points of ``[0, 100]^2``; unit
    cost is the distance. Demand samples are lognormal scaled by
    ``demand_scale``; total capacity is ``capacity_factor`` times the sum of
    the customers' largest samples, split at random across suppliers.
    """
    if min(I, D, N) < 1:
        raise ValueError("I, D and N must be at least 1")
    unknown = set(overrides) - set(TRANSPORT_DEFAULTS) - {"demand"}
    if unknown:
        raise ValueError(f"unknown generator options {sorted(unknown)}")
    cfg = {**TRANSPORT_DEFAULTS, **overrides}
    rng = np.random.default_rng(seed)
    sup = rng.uniform(0.0, 100.0, size=(I, 2))
    cus = rng.uniform(0.0, 100.0, size=(D, 2))
    costs = np.linalg.norm(sup[:, None, :] - cus[None, :, :], axis=2)
    if cfg.get("demand") is not None:
        demand = [np.asarray(d, dtype=float) for d in cfg["demand"]]
        if len(demand) != D:
            raise ValueError("demand override needs one sample list per customer")
    else:
        raw = rng.lognormal(cfg["demand_mu"], cfg["demand_sigma"], size=(D, N))
        demand = [np.round(r * cfg["demand_scale"], 6) for r in raw]
    share = rng.dirichlet(np.full(I, 2.0)) if I > 1 else np.ones(1)
    total = cfg["capacity_factor"] * sum(float(d.max()) for d in demand)
    capacities = np.round(share * total, 6)
    penalties = cfg["p"] + rng.uniform(0.0, cfg["p_jitter"], size=D)
    inst = TransportationInstance(
        capacities,
        np.round(costs, 6),
        demand,
        penalties,
        cfg["epsilon"],
        cfg["alpha_bar"],
        cfg["alpha_min"],
        name=f"transport_s{seed}_I{I}_D{D}_N{N}",
        seed=seed,
    )
    if not inst.feasible_at_alpha_bar():
        raise ValueError("generated capacities cannot cover the worst-case demand at alpha_bar")
    return inst


def canonical_toy(p: float = 1.0, capacity: float = 12.0, epsilon: float = 0.4, alpha_bar: float = 0.9) -> TransportationInstance:
    """One supplier, one customer, samples ``[10, 8, 6, 4, 2]``, unit shipping cost."""
    return TransportationInstance([capacity], [[1.0]], [[10.0, 8.0, 6.0, 4.0, 2.0]], [p], epsilon, alpha_bar, 1e-6, name="toy")


# ---------------------------------------------------------------------------
# building load
# ---------------------------------------------------------------------------


@dataclass
class BuildingLoadInstance:
    A: np.ndarray
    B: np.ndarray
    G: np.ndarray
    v: np.ndarray
    P: np.ndarray
    x0: np.ndarray
    pv: list  # per-period PV samples
    x_min: float = 20.0
    x_max: float = 26.0
    x_ref: float = 22.5
    c_sys: float = 1.0
    c_switch: float = 0.5
    p: float = 20.0
    epsilon: float = 0.02
    alpha_bar: float = 0.3
    alpha_min: float = 1e-6
    name: str = "building_load"
    seed: Optional[int] = None

    def __post_init__(self):
        for key in ("A", "B", "G", "v", "P", "x0"):
            setattr(self, key, np.asarray(getattr(self, key), dtype=float))
        n = self.A.shape[0]
        for key in ("B", "G", "v", "P", "x0"):
            if getattr(self, key).shape != (n,):
                raise ValueError(f"{key} must have one entry per building")
        if np.any(self.A <= 0.0) or np.any(self.A >= 1.0):
            raise ValueError("thermal decay A must lie in (0, 1)")
        if not self.x_min < self.x_ref < self.x_max:
            raise ValueError("need x_min < x_ref < x_max")
        self.pv = [np.asarray(s, dtype=float) for s in self.pv]

    @property
    def n(self) -> int:
        return int(self.A.shape[0])

    @property
    def periods(self) -> int:
        return len(self.pv)

    def next_temperature(self, x_prev, u) -> np.ndarray:
        return self.A * np.asarray(x_prev, dtype=float) + self.B * np.asarray(u, dtype=float) + self.G * self.v

    def period_instance(self, t: int, x_prev=None) -> DrccInstance:
        """Single-period DRCC; variables ``u`` (binary), ``x`` (temperature), ``e`` (|x - x_ref|)."""
        n = self.n
        x_prev = self.x0 if x_prev is None else np.asarray(x_prev, dtype=float)
        names = [f"u_{l + 1}" for l in range(n)] + [f"x_{l + 1}" for l in range(n)] + [f"e_{l + 1}" for l in range(n)]
        c = np.concatenate([np.full(n, self.c_switch), np.zeros(n), np.full(n, self.c_sys)])
        lb = np.concatenate([np.zeros(n), np.full(n, self.x_min), np.zeros(n)])
        ub = np.concatenate([np.ones(n), np.full(n, self.x_max), np.full(n, math.inf)])
        binary = np.concatenate([np.ones(n, dtype=bool), np.zeros(2 * n, dtype=bool)])
        rows = []
        for l in range(n):
            u, x, e = l, n + l, 2 * n + l
            rhs = float(self.A[l] * x_prev[l] + self.G[l] * self.v[l])
            rows.append(LinRow({x: 1.0, u: -float(self.B[l])}, "=", rhs, f"dyn_{l + 1}"))
            rows.append(LinRow({e: 1.0, x: -1.0}, ">=", -self.x_ref, f"devhi_{l + 1}"))
            rows.append(LinRow({e: 1.0, x: 1.0}, ">=", self.x_ref, f"devlo_{l + 1}"))
        cc = ChanceConstraint({l: float(self.P[l]) for l in range(n)}, SampleSet(self.pv[t], self.epsilon), RiskCost("linear", self.p), f"pv{t + 1}")
        return DrccInstance(names, c, lb, ub, binary, rows, [cc], RiskBounds(self.alpha_bar, self.alpha_min), name=f"{self.name}_t{t + 1}")

    def to_json(self) -> dict:
        out = {"schema": SCHEMA_VERSION, "type": "building_load"}
        for key, val in asdict(self).items():
            if isinstance(val, np.ndarray):
                val = val.tolist()
            elif key == "pv":
                val = [np.asarray(s).tolist() for s in val]
            out[key] = val
        out["pv_samples"] = out.pop("pv")
        return out


def gen_building_load(seed: int, n: int, T: int, N: int, **overrides) -> BuildingLoadInstance:
    """Synthetic building fleet with a bell-shaped PV profile over ``T`` periods."""
    if min(n, T, N) < 1:
        raise ValueError("n, T and N must be at least 1")
    unknown = set(overrides) - set(BUILDING_DEFAULTS) - {"pv"}
    if unknown:
        raise ValueError(f"unknown generator options {sorted(unknown)}")
    cfg = {**BUILDING_DEFAULTS, **overrides}
    rng = np.random.default_rng(seed)
    A = rng.uniform(*cfg["a_range"], size=n)
    B = rng.uniform(*cfg["b_range"], size=n)
    v = rng.uniform(*cfg["v_range"], size=n)
    # G is set so the free-running (off) temperature settles inside steady_range
    G = (1.0 - A) * rng.uniform(*cfg["steady_range"], size=n) / v
    P = rng.uniform(*cfg["power_range"], size=n)
    x0 = np.full(n, cfg["x_ref"])
    if cfg.get("pv") is not None:
        pv = [np.asarray(s, dtype=float) for s in cfg["pv"]]
        if len(pv) != T:
            raise ValueError("pv override needs one sample list per period")
    else:
        # daylight window: the profile stays clear of zero at both ends
        hours = 0.1 + 0.8 * (np.arange(T) + 0.5) / T
        mean = cfg["pv_peak"] * P.sum() * np.sin(np.pi * hours)
        noise = rng.normal(0.0, cfg["pv_noise"], size=(T, N))
        pv = [np.round(np.maximum(mean[t] * (1.0 + noise[t]), 0.0), 6) for t in range(T)]
    return BuildingLoadInstance(
        np.round(A, 6),
        np.round(B, 6),
        np.round(G, 6),
        np.round(v, 6),
        np.round(P, 6),
        x0,
        pv,
        cfg["x_min"],
        cfg["x_max"],
        cfg["x_ref"],
        cfg["c_sys"],
        cfg["c_switch"],
        cfg["p"],
        cfg["epsilon"],
        cfg["alpha_bar"],
        cfg["alpha_min"],
        name=f"building_s{seed}_n{n}_T{T}_N{N}",
        seed=seed,
    )


# ---------------------------------------------------------------------------
# files
# ---------------------------------------------------------------------------

_NUM = {"type": "number"}
_NUMS = {"type": "array", "items": _NUM, "minItems": 1}
_COMMON = {
    "schema": {"const": SCHEMA_VERSION},
    "name": {"type": "string"},
    "seed": {"type": ["integer", "null"]},
    "epsilon": {"type": "number", "exclusiveMinimum": 0},
    "alpha_bar": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
    "alpha_min": {"type": "number", "exclusiveMinimum": 0},
}

TRANSPORT_SCHEMA = {
    "type": "object",
    "required": ["schema", "type", "epsilon", "alpha_bar", "capacities", "costs", "penalties"],
    "properties": {
        **_COMMON,
        "type": {"const": "transportation"},
        "capacities": _NUMS,
        "costs": {"type": "array", "items": _NUMS, "minItems": 1},
        "penalties": _NUMS,
        "demand_samples": {"type": "array", "items": _NUMS, "minItems": 1},
        "demand_csv": {"type": "array", "items": {"type": "string"}, "minItems": 1},
    },
    "oneOf": [{"required": ["demand_samples"]}, {"required": ["demand_csv"]}],
}

BUILDING_SCHEMA = {
    "type": "object",
    "required": ["schema", "type", "epsilon", "alpha_bar", "A", "B", "G", "v", "P", "x0", "pv_samples"],
    "properties": {
        **_COMMON,
        "type": {"const": "building_load"},
        **{k: _NUMS for k in ("A", "B", "G", "v", "P", "x0")},
        "pv_samples": {"type": "array", "items": _NUMS, "minItems": 1},
        **{k: _NUM for k in ("x_min", "x_max", "x_ref", "c_sys", "c_switch", "p")},
    },
}

Instance = Union[TransportationInstance, BuildingLoadInstance]


def _validate(doc, schema):
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path)
        if exc.validator == "required":
            missing = [k for k in exc.validator_value if k not in exc.instance]
            field_ = "/".join(filter(None, [path, missing[0] if missing else ""]))
            raise InstanceSchemaError(f"field '{field_}': required field is missing") from None
        raise InstanceSchemaError(f"field '{path or '<root>'}': {exc.message}") from None


def load_samples_csv(path, epsilon: float) -> SampleSet:
    """Read one column named ``xi`` (header optional); values are sorted by :class:`SampleSet`."""
    text = Path(path).read_text()
    vals = []
    for lineno, rec in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not rec or not rec[0].strip():
            continue
        cell = rec[0].strip()
        if lineno == 1 and cell.lower() == "xi":
            continue
        try:
            vals.append(float(cell))
        except ValueError:
            raise InstanceSchemaError(f"{path}: line {lineno}: field 'xi': not a number: {cell!r}") from None
    if not vals:
        raise InstanceSchemaError(f"{path}: field 'xi': no samples")
    return SampleSet(vals, epsilon)


def instance_from_json(doc: dict, base: Optional[Path] = None) -> Instance:
    if not isinstance(doc, dict):
        raise InstanceSchemaError("field '<root>': expected a JSON object")
    if "type" not in doc:
        raise InstanceSchemaError("field 'type': required field is missing")
    kind = doc["type"]
    if kind == "transportation":
        _validate(doc, TRANSPORT_SCHEMA)
        if "demand_samples" in doc:
            demand = doc["demand_samples"]
        else:
            root = base or Path(".")
            demand = [load_samples_csv(root / p, doc["epsilon"]).values for p in doc["demand_csv"]]
        try:
            return TransportationInstance(
                doc["capacities"],
                doc["costs"],
                demand,
                doc["penalties"],
                doc["epsilon"],
                doc["alpha_bar"],
                doc.get("alpha_min", 1e-6),
                name=doc.get("name", "transportation"),
                seed=doc.get("seed"),
            )
        except ValueError as exc:
            raise InstanceSchemaError(f"field 'costs': {exc}") from None
    if kind == "building_load":
        _validate(doc, BUILDING_SCHEMA)
        kw = {k: doc[k] for k in ("x_min", "x_max", "x_ref", "c_sys", "c_switch", "p", "alpha_min", "name", "seed") if k in doc}
        try:
            return BuildingLoadInstance(
                doc["A"], doc["B"], doc["G"], doc["v"], doc["P"], doc["x0"], doc["pv_samples"],
                epsilon=doc["epsilon"], alpha_bar=doc["alpha_bar"], **kw,
            )
        except ValueError as exc:
            raise InstanceSchemaError(f"field 'A': {exc}") from None
    raise InstanceSchemaError(f"field 'type': unknown instance type {kind!r}")


def dumps_instance(inst: Instance) -> str:
    return json.dumps(inst.to_json(), sort_keys=True, indent=1) + "\n"


def save_instance(inst: Instance, path) -> None:
    Path(path).write_text(dumps_instance(inst))


def load_instance(path) -> Instance:
    """Read a schema-v1 JSON instance; ``demand_csv`` paths resolve relative to its directory."""
    path = Path(path)
    text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceSchemaError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return instance_from_json(doc, path.parent)

"""LP and fixed-field MPS text export/import for :class:`~drcc.model.ModelIR`.

Both writers are deterministic: output depends only on the order in which the
model was built. Information the formats cannot carry natively (cone tags,
submodular hooks, the objective constant in LP, variable order) travels in
comment lines prefixed ``\\* drcc:`` (LP) or ``* drcc:`` (MPS).
"""

from __future__ import annotations

import json
import math
import re

from .model import BINARY, CONTINUOUS, INF, ConeTag, ModelError, ModelIR, SubmodularEpigraph

MPS_INF = 1e30
_TERMS_PER_LINE = 6
_NAMES_PER_LINE = 12


class FormatError(ModelError):
    pass


def _num(a: float) -> str:
    if a == INF:
        return "+inf"
    if a == -INF:
        return "-inf"
    s = format(float(a), ".17g")
    # shortest repr when it round-trips (keeps files readable)
    r = repr(float(a))
    return r if float(r) == float(s) and len(r) <= len(s) else s


def _linear_terms(coeffs: dict, names: list[str]) -> list[str]:
    out = []
    for j, a in coeffs.items():
        sign = "-" if a < 0 else "+"
        out.append(f"{sign} {_num(abs(a))} {names[j]}")
    return out


def _wrap(head: str, terms: list[str], tail: str = "") -> list[str]:
    lines = []
    for i in range(0, max(len(terms), 1), _TERMS_PER_LINE):
        chunk = " ".join(terms[i : i + _TERMS_PER_LINE])
        lines.append((head if i == 0 else "   ") + chunk)
    if tail:
        lines[-1] += tail
    return lines


def _check_finite(model: ModelIR):
    for r in model.rows:
        if not math.isfinite(r.rhs) or not all(math.isfinite(a) for a in r.coefficients.values()):
            raise FormatError(f"non-finite data in row {r.name!r}")
    if not all(math.isfinite(a) for a in model.objective.coefficients.values()):
        raise FormatError("non-finite objective coefficient")
    for v in model.variables:
        if math.isnan(v.lb) or math.isnan(v.ub):
            raise FormatError(f"NaN bound on {v.name!r}")


def _cone_payload(cone: ConeTag, names) -> str:
    return json.dumps(
        {"name": cone.name, "kind": cone.kind, "members": [names[m] for m in cone.members], "scale": cone.scale},
        sort_keys=True,
    )


def _hook_payload(hook: SubmodularEpigraph, names) -> str:
    return json.dumps(
        {
            "name": hook.name,
            "kind": "submodular-epigraph",
            "o": [names[o] for o in hook.o_indices],
            "sigma": hook.sigma,
            "d": list(hook.d),
            "tau": names[hook.tau_index],
        },
        sort_keys=True,
    )


# ---------------------------------------------------------------------------
# LP
# ---------------------------------------------------------------------------


def export_lp(model: ModelIR) -> bytes:
    _check_finite(model)
    names = [v.name for v in model.variables]
    out = [f"\\* drcc: model {model.name} *\\"]
    for i in range(0, len(names), _NAMES_PER_LINE):
        out.append("\\* drcc: vars " + " ".join(names[i : i + _NAMES_PER_LINE]) + " *\\")
    if model.objective.constant:
        out.append(f"\\* drcc: objective-constant {_num(model.objective.constant)} *\\")
    for key, note in model.annotations.items():
        out.append(f"\\* drcc: note {key} {json.dumps(note)} *\\")
    out.append("Minimize" if model.objective.sense == "min" else "Maximize")
    terms = _linear_terms(model.objective.coefficients, names)
    if not terms and names:
        terms = [f"+ 0 {names[0]}"]
    out.extend(_wrap(" obj: ", terms))
    out.append("Subject To")
    sense_txt = {"<=": "<=", ">=": ">=", "=": "="}
    for r in model.rows:
        out.extend(_wrap(f" {r.name}: ", _linear_terms(r.coefficients, names), f" {sense_txt[r.sense]} {_num(r.rhs)}"))
    for cone in model.cones:
        out.append(f"\\* drcc: cone {_cone_payload(cone, names)} *\\")
        m = [names[i] for i in cone.members]
        if cone.kind == "soc":
            quad = " + ".join(f"{t} ^2" for t in m[1:]) + f" - {m[0]} ^2"
        else:
            s2 = _num(cone.scale**2)
            quad = " + ".join(f"{s2} {t} ^2" for t in m[2:]) + f" - 2 {m[0]} * {m[1]}"
        out.append(f" {cone.name}: [ {quad} ] <= 0")
    for hook in model.hooks:
        out.append(f"\\* drcc: hook {_hook_payload(hook, names)} *\\")
    out.append("Bounds")
    for v in model.variables:
        if v.kind == BINARY and v.lb == 0.0 and v.ub == 1.0:
            continue
        if v.lb == -INF and v.ub == INF:
            out.append(f" {v.name} free")
        elif v.ub == INF:
            out.append(f" {v.name} >= {_num(v.lb)}")
        elif v.lb == v.ub:
            out.append(f" {v.name} = {_num(v.lb)}")
        else:
            out.append(f" {_num(v.lb)} <= {v.name} <= {_num(v.ub)}")
    bins = [v.name for v in model.variables if v.kind == BINARY]
    if bins:
        out.append("Binaries")
        for i in range(0, len(bins), _NAMES_PER_LINE):
            out.append(" " + " ".join(bins[i : i + _NAMES_PER_LINE]))
    if model.sos1_groups:
        out.append("SOS")
        for g, group in enumerate(model.sos1_groups):
            members = [f"{names[i]}:{w + 1}" for w, i in enumerate(group)]
            out.extend(_wrap(f" s{g}: S1:: ", members))
    out.append("End")
    return ("\n".join(out) + "\n").encode("ascii")


_COMMENT = re.compile(r"^\\\*\s*drcc:\s*(\S+)\s*(.*?)\s*\*\\\s*$")
_LABEL = re.compile(r"^[A-Za-z_][\w.\-]*\s*:")
_SECTIONS = {
    "minimize": "obj",
    "minimum": "obj",
    "min": "obj",
    "maximize": "obj",
    "maximum": "obj",
    "max": "obj",
    "subject to": "rows",
    "such that": "rows",
    "st": "rows",
    "s.t.": "rows",
    "bounds": "bounds",
    "binaries": "bin",
    "binary": "bin",
    "generals": "gen",
    "sos": "sos",
    "end": "end",
}


def _parse_expr(tokens: list[str], lineno: int) -> dict:
    """Parse ``[sign] [number] name ...`` into an ordered name->coef dict."""
    coeffs: dict[str, float] = {}
    sign, num = 1.0, None
    for tok in tokens:
        if tok in ("+", "-"):
            sign = 1.0 if tok == "+" else -1.0
            continue
        try:
            val = float(tok)
        except ValueError:
            a = sign * (1.0 if num is None else num)
            coeffs[tok] = coeffs.get(tok, 0.0) + a
            sign, num = 1.0, None
            continue
        if num is not None:
            raise FormatError(f"line {lineno}: two numbers in a row")
        num = val
    if num is not None:
        raise FormatError(f"line {lineno}: dangling coefficient")
    return coeffs


def _tokenize(text: str) -> list[str]:
    text = re.sub(r"([+\-])(?=\s|[A-Za-z_])", r" \1 ", text)
    return text.split()


def _number(tok: str, lineno: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise FormatError(f"line {lineno}: expected a number, got {tok!r}") from None


def _parse_bound_value(tok: str) -> float:
    t = tok.lower()
    if t in ("+inf", "inf", "+infinity", "infinity"):
        return INF
    if t in ("-inf", "-infinity"):
        return -INF
    return float(tok)


def parse_lp(data) -> ModelIR:
    text = data.decode("ascii") if isinstance(data, (bytes, bytearray)) else str(data)
    name = "drcc"
    order: list[str] = []
    constant = 0.0
    notes: dict[str, str] = {}
    cone_specs, hook_specs = [], []
    sense = "min"
    section = None
    statements: dict[str, list] = {"obj": [], "rows": [], "bounds": [], "bin": [], "sos": []}
    current: list = []
    current_section = None

    def flush():
        nonlocal current
        if current and current_section in statements:
            statements[current_section].append(current)
        current = []

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        m = _COMMENT.match(line)
        if m:
            key, rest = m.group(1), m.group(2)
            if key == "model":
                name = rest
            elif key == "vars":
                order.extend(rest.split())
            elif key == "objective-constant":
                constant = _number(rest, lineno)
            elif key == "note":
                k, _, payload = rest.partition(" ")
                notes[k] = json.loads(payload)
            elif key == "cone":
                cone_specs.append(json.loads(rest))
            elif key == "hook":
                hook_specs.append(json.loads(rest))
            continue
        if line.startswith("\\"):
            continue
        low = line.lower()
        if low in _SECTIONS:
            flush()
            section = _SECTIONS[low]
            if low.startswith("max"):
                sense = "max"
            current_section = section
            if section == "end":
                break
            continue
        if section is None:
            raise FormatError(f"line {lineno}: content before any section")
        if section in ("bounds", "bin"):
            flush()
        elif section == "sos":
            if "::" in line:
                flush()
        elif _LABEL.match(line) or not current:
            flush()
        current.append((lineno, line))
    flush()

    var_names: list[str] = list(order)
    seen = set(var_names)

    def touch(nm):
        if nm not in seen:
            seen.add(nm)
            var_names.append(nm)

    obj_coeffs: dict[str, float] = {}
    for stmt in statements["obj"]:
        body = " ".join(line for _, line in stmt)
        body = body.split(":", 1)[1] if ":" in body else body
        obj_coeffs = _parse_expr(_tokenize(body), stmt[0][0])
        for nm in obj_coeffs:
            touch(nm)

    rows = []
    for stmt in statements["rows"]:
        body = " ".join(line for _, line in stmt)
        lineno = stmt[0][0]
        rname, _, body = body.partition(":") if ":" in body.split("[")[0] else ("", "", body)
        if "[" in body:
            continue  # quadratic cone rows are rebuilt from their annotation
        m = re.match(r"^(.*?)(<=|>=|=<|=>|=|<|>)\s*(\S+)\s*$", body)
        if not m:
            raise FormatError(f"line {lineno}: cannot parse constraint")
        expr, op, rhs = m.groups()
        op = {"=<": "<=", "<": "<=", "=>": ">=", ">": ">="}.get(op, op)
        coeffs = _parse_expr(_tokenize(expr), lineno)
        for nm in coeffs:
            touch(nm)
        rows.append((rname.strip(), coeffs, op, _number(rhs, lineno)))

    bounds: dict[str, list] = {}
    for stmt in statements["bounds"]:
        lineno, line = stmt[0]
        toks = line.split()
        if len(toks) == 2 and toks[1].lower() == "free":
            bounds[toks[0]] = [-INF, INF]
            touch(toks[0])
        elif len(toks) == 3:
            nm, op, val = toks
            b = bounds.setdefault(nm, [0.0, INF])
            v = _parse_bound_value(val)
            if op in (">=", "=>"):
                b[0] = v
            elif op in ("<=", "=<"):
                b[1] = v
            elif op == "=":
                b[0] = b[1] = v
            else:
                raise FormatError(f"line {lineno}: bad bound operator {op!r}")
            touch(nm)
        elif len(toks) == 5:
            lo, _, nm, _, hi = toks
            bounds[nm] = [_parse_bound_value(lo), _parse_bound_value(hi)]
            touch(nm)
        else:
            raise FormatError(f"line {lineno}: cannot parse bound")

    binaries = []
    for stmt in statements["bin"]:
        for _, line in stmt:
            for nm in line.split():
                binaries.append(nm)
                touch(nm)
    bin_set = set(binaries)

    model = ModelIR(name)
    for nm in var_names:
        if nm in bin_set:
            lo, hi = bounds.get(nm, [0.0, 1.0])
            model.add_variable(nm, BINARY, lo, hi)
        else:
            lo, hi = bounds.get(nm, [0.0, INF])
            model.add_variable(nm, CONTINUOUS, lo, hi)
    idx = model.var
    model.set_objective({idx(k): v for k, v in obj_coeffs.items()}, constant, sense)
    for rname, coeffs, op, rhs in rows:
        model.add_row({idx(k): v for k, v in coeffs.items()}, op, rhs, name=rname or None)
    for spec in cone_specs:
        model.add_cone(spec["kind"], [idx(m) for m in spec["members"]], name=spec["name"], scale=spec["scale"])
    for spec in hook_specs:
        model.add_hook(
            SubmodularEpigraph(
                tuple(idx(o) for o in spec["o"]), float(spec["sigma"]), tuple(spec["d"]), idx(spec["tau"]), spec["name"]
            )
        )
    for stmt in statements["sos"]:
        body = " ".join(line for _, line in stmt)
        body = body.split("::", 1)[1]
        members = [tok.split(":")[0] for tok in body.split()]
        model.add_sos1([idx(m) for m in members])
    model.annotations.update(notes)
    return model.finalize()


# ---------------------------------------------------------------------------
# MPS (fixed field)
# ---------------------------------------------------------------------------


def _field_line(f1="", f2="", f3="", f4="", f5="", f6="") -> str:
    line = f" {f1:<2} {f2:<8}  {f3:<8}  {f4:>12}"
    if f5:
        line += f"   {f5:<8}  {f6:>12}"
    return line.rstrip()


def export_mps(model: ModelIR, oa_cuts=None) -> bytes:
    """Fixed-field MPS text.

    Cones and submodular hooks have no MPS representation; they are only
    accepted when ``oa_cuts`` (a snapshot of linear cuts) is supplied, in which
    case the cuts are appended as rows and the nonlinear parts dropped.
    """
    _check_finite(model)
    nonlinear = bool(model.cones or model.hooks)
    if nonlinear:
        if oa_cuts is None:
            raise FormatError("MPS export of a model with cones needs an outer-approximation cut snapshot")
        model = model.with_cuts(oa_cuts, drop_cones=True)
        model.hooks = []
    names = [v.name for v in model.variables]
    out = [f"* drcc: model {model.name}"]
    if nonlinear:
        out.append(f"* drcc: linearized with {len(oa_cuts)} snapshot cuts")
    out.append(f"NAME          {model.name}")
    if model.objective.sense == "max":
        out.append("OBJSENSE")
        out.append("    MAX")
    out.append("ROWS")
    out.append(" N  obj")
    code = {"<=": "L", ">=": "G", "=": "E"}
    for r in model.rows:
        out.append(f" {code[r.sense]}  {r.name}")
    out.append("COLUMNS")
    col_entries: list[list] = [[] for _ in names]
    for j, a in model.objective.coefficients.items():
        col_entries[j].append(("obj", a))
    for r in model.rows:
        for j, a in r.coefficients.items():
            col_entries[j].append((r.name, a))
    in_int = False
    marker = 0
    for j, v in enumerate(model.variables):
        if v.kind == BINARY and not in_int:
            out.append(_field_line("", "MARKER", "'MARKER'", "", "'INTORG'"))
            in_int = True
            marker += 1
        elif v.kind != BINARY and in_int:
            out.append(_field_line("", "MARKER", "'MARKER'", "", "'INTEND'"))
            in_int = False
        entries = col_entries[j] or [("obj", 0.0)]
        for k in range(0, len(entries), 2):
            pair = entries[k : k + 2]
            if len(pair) == 2:
                out.append(_field_line("", v.name, pair[0][0], _num(pair[0][1]), pair[1][0], _num(pair[1][1])))
            else:
                out.append(_field_line("", v.name, pair[0][0], _num(pair[0][1])))
    if in_int:
        out.append(_field_line("", "MARKER", "'MARKER'", "", "'INTEND'"))
    out.append("RHS")
    rhs_entries = [(r.name, r.rhs) for r in model.rows if r.rhs != 0.0]
    if model.objective.constant:
        rhs_entries.append(("obj", -model.objective.constant))
    for name, val in rhs_entries:
        out.append(_field_line("", "RHS", name, _num(val)))
    out.append("BOUNDS")
    for v in model.variables:
        if v.kind == BINARY and v.lb == 0.0 and v.ub == 1.0:
            out.append(_field_line("BV", "BND", v.name))
            continue
        lb = -MPS_INF if v.lb == -INF else v.lb
        ub = MPS_INF if v.ub == INF else v.ub
        if lb == ub:
            out.append(_field_line("FX", "BND", v.name, _num(lb)))
            continue
        if lb != 0.0:
            out.append(_field_line("LO", "BND", v.name, _num(lb)))
        if ub != MPS_INF or v.kind == BINARY:
            out.append(_field_line("UP", "BND", v.name, _num(ub)))
    out.append("ENDATA")
    return ("\n".join(out) + "\n").encode("ascii")


def parse_mps(data) -> ModelIR:
    text = data.decode("ascii") if isinstance(data, (bytes, bytearray)) else str(data)
    name = "drcc"
    section = None
    row_sense: dict[str, str] = {}
    row_order: list[str] = []
    obj_row = None
    sense = "min"
    cols: dict[str, dict] = {}
    col_order: list[str] = []
    integer: set[str] = set()
    rhs: dict[str, float] = {}
    bnds: dict[str, list] = {}
    binaries: set[str] = set()
    in_int = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        if not raw.strip() or raw.startswith("*"):
            continue
        toks = raw.split()
        if raw[0] not in (" ", "\t"):
            section = toks[0].upper()
            if section == "NAME" and len(toks) > 1:
                name = toks[1]
            if section == "ENDATA":
                break
            continue
        try:
            if section == "OBJSENSE":
                sense = "max" if toks[0].upper().startswith("MAX") else "min"
            elif section == "ROWS":
                kind, rname = toks[0].upper(), toks[1]
                if kind == "N":
                    if obj_row is None:
                        obj_row = rname
                    continue
                if kind not in ("L", "G", "E"):
                    raise FormatError(f"line {lineno}: unknown row type {kind!r}")
                row_sense[rname] = {"L": "<=", "G": ">=", "E": "="}[kind]
                row_order.append(rname)
            elif section == "COLUMNS":
                if len(toks) >= 3 and toks[1] == "'MARKER'":
                    in_int = toks[2] == "'INTORG'"
                    continue
                cname = toks[0]
                if cname not in cols:
                    cols[cname] = {}
                    col_order.append(cname)
                if in_int:
                    integer.add(cname)
                for k in range(1, len(toks) - 1, 2):
                    if toks[k] != obj_row and toks[k] not in row_sense:
                        raise FormatError(f"line {lineno}: unknown row {toks[k]!r}")
                    cols[cname][toks[k]] = cols[cname].get(toks[k], 0.0) + float(toks[k + 1])
            elif section == "RHS":
                for k in range(1, len(toks) - 1, 2):
                    rhs[toks[k]] = float(toks[k + 1])
            elif section == "BOUNDS":
                kind, cname = toks[0].upper(), toks[2]
                val = float(toks[3]) if len(toks) > 3 else None
                b = bnds.setdefault(cname, [0.0, INF])
                if val is not None and abs(val) >= MPS_INF:
                    val = INF if val > 0 else -INF
                if kind == "UP":
                    b[1] = val
                elif kind == "LO":
                    b[0] = val
                elif kind == "FX":
                    b[0] = b[1] = val
                elif kind == "FR":
                    b[0], b[1] = -INF, INF
                elif kind == "MI":
                    b[0] = -INF
                elif kind == "PL":
                    b[1] = INF
                elif kind == "BV":
                    binaries.add(cname)
                    b[0], b[1] = 0.0, 1.0
                else:
                    raise FormatError(f"line {lineno}: unsupported bound type {kind}")
            elif section == "RANGES":
                raise FormatError(f"line {lineno}: RANGES are not supported")
        except (ValueError, IndexError) as exc:
            if isinstance(exc, FormatError):
                raise
            raise FormatError(f"line {lineno}: malformed {section} record") from None
    model = ModelIR(name)
    for cname in col_order:
        lo, hi = bnds.get(cname, [0.0, INF])
        kind = BINARY if (cname in binaries or (cname in integer and lo >= 0.0 and hi <= 1.0)) else CONTINUOUS
        if cname in integer and kind != BINARY:
            raise FormatError(f"general integer column {cname!r} is not supported")
        model.add_variable(cname, kind, lo, hi)
    obj = {}
    for j, cname in enumerate(col_order):
        if obj_row in cols[cname]:
            obj[j] = cols[cname][obj_row]
    model.set_objective(obj, -rhs.get(obj_row, 0.0), sense)
    row_coeffs: dict[str, dict] = {r: {} for r in row_order}
    for j, cname in enumerate(col_order):
        for rname, a in cols[cname].items():
            if rname != obj_row:
                row_coeffs[rname][j] = a
    for rname in row_order:
        model.add_row(row_coeffs[rname], row_sense[rname], rhs.get(rname, 0.0), name=rname)
    return model.finalize()

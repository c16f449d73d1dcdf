"""Versioned plain-text persistence for orbits, branches, and recipes.

All floats are printed with %.17g, which round-trips float64 exactly, so a
save/load cycle is lossless up to the documented omissions (branch points
drop their stored profiles; multipliers are kept as moduli).
"""

import dataclasses
import hashlib
import json
import time

import numpy as np

from . import continuation
from .model import PARAM_NAMES, ParameterSet
from .orbit import PeriodicOrbit, assemble_residual

ORBIT_MAGIC = "# tdscont orbit v"
BRANCH_MAGIC = "# tdscont branch v"
FORMAT_VERSION = 1
F = "%.17g"


class FormatError(ValueError):
    """Unreadable or corrupt file content."""


class VersionError(FormatError):
    """File written by an unsupported format version."""


def _check_version(line, magic, what):
    if not line.startswith(magic):
        raise FormatError(f"not a {what} file (missing '{magic.strip()}')")
    try:
        ver = int(line[len(magic):].strip())
    except ValueError:
        raise FormatError(f"malformed {what} version line: {line!r}")
    if ver != FORMAT_VERSION:
        raise VersionError(
            f"{what} file version {ver} not supported "
            f"(this build reads version {FORMAT_VERSION})")


# ------------------------------------------------------------------ orbits

def save_orbit(orbit, path):
    """Write one orbit: parameter header, mesh block, node-value block."""
    n_int = len(orbit.mesh) - 1
    lines = [f"{ORBIT_MAGIC}{FORMAT_VERSION}"]
    for name in PARAM_NAMES:
        lines.append(f"{name} = {F % orbit.params.get(name)}")
    lines.append(f"period = {F % orbit.period}")
    lines.append(f"delta = {F % (orbit.period - orbit.params.tau)}")
    lines.append(f"degree = {orbit.degree}")
    lines.append(f"n_int = {n_int}")
    lines.append(f"residual_norm = {F % orbit.residual_norm}")
    lines.append(f"converged = {int(orbit.converged)}")
    lines.append("[mesh]")
    lines.extend(F % v for v in orbit.mesh)
    lines.append("[values]")
    lines.extend("\t".join(F % v for v in row) for row in orbit.values)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def load_orbit(path, verify=True):
    """Read an orbit file and re-verify its collocation residual.

    The stored profile must satisfy the discrete equations to within ten
    times its recorded residual level; anything worse is reported as file
    corruption.
    """
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines:
        raise FormatError(f"empty orbit file: {path}")
    _check_version(lines[0], ORBIT_MAGIC, "orbit")
    head, i = {}, 1
    while i < len(lines) and lines[i] != "[mesh]":
        key, _, val = lines[i].partition("=")
        head[key.strip()] = val.strip()
        i += 1
    try:
        p = ParameterSet(**{k: float(head[k]) for k in PARAM_NAMES})
        period = float(head["period"])
        degree = int(head["degree"])
        n_int = int(head["n_int"])
        resid = float(head["residual_norm"])
        conv = bool(int(head.get("converged", "1")))
    except (KeyError, ValueError) as exc:
        raise FormatError(f"bad orbit header in {path}: {exc}")
    if i >= len(lines):
        raise FormatError(f"missing [mesh] block in {path}")
    try:
        mesh = np.array([float(v) for v in lines[i + 1:i + 2 + n_int]])
        j = i + 2 + n_int
        if lines[j] != "[values]":
            raise ValueError("missing [values] block")
        n_nodes = n_int * degree + 1
        values = np.array([[float(v) for v in ln.split()]
                           for ln in lines[j + 1:j + 1 + n_nodes]])
        if values.shape != (n_nodes, 3):
            raise ValueError(f"value block shape {values.shape}")
    except (ValueError, IndexError) as exc:
        raise FormatError(f"bad orbit data in {path}: {exc}")
    orbit = PeriodicOrbit(p, period, mesh, values, degree, resid, conv)
    if verify:
        res = float(np.linalg.norm(assemble_residual(orbit), np.inf))
        bound = 10.0 * max(resid, 1e-10)
        if res > bound:
            raise FormatError(
                f"orbit in {path} violates its equations: residual "
                f"{res:.3e} exceeds {bound:.3e} (corrupt file?)")
    return orbit


# ----------------------------------------------------------------- branches

def _branch_columns(branch, n_lead):
    tests = sorted({k for pt in branch.points for k in pt.tests})
    cols = list(PARAM_NAMES) + ["T", "delta", "amplitude"]
    cols += [f"mult{i + 1}" for i in range(n_lead)]
    cols += [f"test:{name}" for name in tests]
    cols += ["events", "classification"]
    return cols, tests


def _nearest_point(branch, params):
    ref = np.array([params.get(n) for n in PARAM_NAMES])
    best, dist = 0, np.inf
    for i, pt in enumerate(branch.points):
        d = np.linalg.norm(
            ref - np.array([pt.params.get(n) for n in PARAM_NAMES]))
        if d < dist:
            best, dist = i, d
    return best


def save_branch(branch, path):
    """Write a branch as one row per point plus a companion events file.

    Multipliers are stored as moduli. Rows carry an event-flag column
    naming the event kinds refined nearest to that point; full event
    records go to path + '.events'.
    """
    if not branch.points:
        raise ValueError("refusing to export an empty branch")
    n_lead = max((len(pt.multipliers) for pt in branch.points
                  if pt.multipliers is not None), default=0)
    cols, tests = _branch_columns(branch, n_lead)
    flags = {}
    for ev in branch.events:
        flags.setdefault(_nearest_point(branch, ev.params), []).append(ev.kind)
    lines = [f"{BRANCH_MAGIC}{FORMAT_VERSION}",
             f"free = {' '.join(branch.free_params)}",
             f"status = {branch.status}",
             f"n_points = {len(branch.points)}",
             "columns = " + "\t".join(cols)]
    for i, pt in enumerate(branch.points):
        row = [F % pt.params.get(n) for n in PARAM_NAMES]
        row += [F % pt.period, F % pt.delta, F % pt.amplitude]
        mods = [] if pt.multipliers is None else np.abs(pt.multipliers)
        row += [F % m for m in mods] + ["nan"] * (n_lead - len(mods))
        row += [F % pt.tests.get(t, np.nan) for t in tests]
        row.append(",".join(flags.get(i, [])) or "-")
        row.append(pt.classification or "-")
        lines.append("\t".join(row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    ev_cols = ["kind", "locator_residual"] + list(PARAM_NAMES) + ["T"]
    ev_lines = ["columns = " + "\t".join(ev_cols)]
    for ev in branch.events:
        T = ev.info.get("period", np.nan) if ev.info else np.nan
        if ev.orbit is not None:
            T = ev.orbit.period
        row = [ev.kind, F % ev.locator_residual]
        row += [F % ev.params.get(n) for n in PARAM_NAMES]
        row.append(F % T)
        ev_lines.append("\t".join(row))
    with open(path + ".events", "w") as fh:
        fh.write("\n".join(ev_lines) + "\n")
    return path


def load_branch(path):
    """Rebuild a branch (point data and events; no profiles) from a file."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines:
        raise FormatError(f"empty branch file: {path}")
    _check_version(lines[0], BRANCH_MAGIC, "branch")
    try:
        free = tuple(lines[1].split("=", 1)[1].split())
        status = lines[2].split("=", 1)[1].strip()
        n_points = int(lines[3].split("=", 1)[1])
        cols = lines[4].split("=", 1)[1].strip().split("\t")
    except (IndexError, ValueError) as exc:
        raise FormatError(f"bad branch header in {path}: {exc}")
    idx = {c: k for k, c in enumerate(cols)}
    mult_cols = [c for c in cols if c.startswith("mult")]
    test_cols = [c for c in cols if c.startswith("test:")]
    branch = continuation.Branch(free_params=free, status=status)
    rows = lines[5:5 + n_points]
    if len(rows) != n_points:
        raise FormatError(f"branch file {path} truncated: "
                          f"{len(rows)}/{n_points} rows")
    for ln in rows:
        cells = ln.split("\t")
        if len(cells) != len(cols):
            raise FormatError(f"row width mismatch in {path}")
        p = ParameterSet(**{n: float(cells[idx[n]]) for n in PARAM_NAMES})
        mods = np.array([float(cells[idx[c]]) for c in mult_cols])
        mods = mods[~np.isnan(mods)]
        cls = cells[idx["classification"]]
        branch.points.append(continuation.BranchPoint(
            params=p, period=float(cells[idx["T"]]),
            delta=float(cells[idx["delta"]]),
            amplitude=float(cells[idx["amplitude"]]),
            tests={c[5:]: float(cells[idx[c]]) for c in test_cols},
            multipliers=mods if len(mods) else None,
            classification=None if cls == "-" else cls))
    return branch


# ------------------------------------------------------------------ recipes

def _recipe_lines(recipe, tag=""):
    sfx = f" {tag}" if tag else ""
    lines = [f"[recipe{sfx}]",
             f"name = {recipe.name}",
             f"kind = {recipe.kind}"]
    if recipe.period is not None:
        lines.append(f"period = {F % recipe.period}")
    for key, val in sorted(recipe.meta.items()):
        if key == "opts":
            lines.extend(f"opt.{k} = {v}" for k, v in sorted(val.items()))
        else:
            lines.append(f"{key} = {val}")
    lines += ["", f"[initial{sfx}]"]
    lines += [f"{n} = {F % recipe.initial.get(n)}" for n in PARAM_NAMES]
    for i, st in enumerate(recipe.stages):
        label = f"{tag}.{i + 1}" if tag else str(i + 1)
        lines += ["", f"[stage {label}]",
                  f"free = {' '.join(st.free)}",
                  f"stop = {st.stop_param} {F % st.stop_value}"]
        if st.hits != 1:
            lines.append(f"hits = {st.hits}")
        if st.min_hits is not None:
            lines.append(f"min_hits = {st.min_hits}")
        if st.pick is not None:
            lines.append(f"pick = {st.pick[0]} {st.pick[1]}")
        if st.reappear:
            lines.append(f"reappear = {st.reappear}")
        for k, v in sorted(st.opts.items()):
            lines.append(f"opt.{k} = {v}")
    return lines


def save_recipe(recipe, path):
    """Write a recipe as sectioned text mirroring the table layout."""
    with open(path, "w") as fh:
        fh.write("\n".join(_recipe_lines(recipe)) + "\n")
    return path


def save_recipes(recipes, path):
    """Write several recipes to one file using numbered section groups.

    Group K holds [recipe K], [initial K] and [stage K.N]; a one-element
    list still gets the numbered form so the file layout is predictable.
    """
    lines = []
    for i, recipe in enumerate(recipes):
        if i:
            lines.append("")
        lines.extend(_recipe_lines(recipe, tag=str(i + 1)))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def _coerce(val):
    if val in ("True", "true"):
        return True
    if val in ("False", "false"):
        return False
    try:
        f = float(val)
    except ValueError:
        return val
    return int(f) if f == int(f) and "." not in val and "e" not in val else f


def _parse_stage(st, sec, path):
    try:
        stop_name, stop_val = st["stop"].split()
    except (KeyError, ValueError):
        raise FormatError(f"stage '{sec}' in {path} needs "
                          f"'stop = <param> <value>'")
    pick = None
    if "pick" in st:
        pn, pm = st["pick"].split()
        pick = (pn, pm)
    st_opts = {k[4:]: _coerce(v) for k, v in st.items()
               if k.startswith("opt.")}
    return continuation.Stage(
        free=tuple(st["free"].split()),
        stop_param=stop_name, stop_value=float(stop_val),
        hits=st.getint("hits", 1),
        min_hits=st.getint("min_hits", fallback=None),
        pick=pick, reappear=st.getint("reappear", 0), opts=st_opts)


def _parse_recipe(cp, rsec, isec, stage_secs, path):
    head = cp[rsec]
    meta, opts = {}, {}
    for key, val in head.items():
        if key in ("name", "kind", "period"):
            continue
        if key.startswith("opt."):
            opts[key[4:]] = _coerce(val)
        else:
            meta[key] = val
    if opts:
        meta["opts"] = opts
    initial = ParameterSet(**{k: float(v) for k, v in cp[isec].items()})
    stages = [_parse_stage(cp[sec], sec, path) for sec in stage_secs]
    if not stages:
        raise FormatError(f"recipe section [{rsec}] in {path} has no stages")
    period = float(head["period"]) if "period" in head else None
    return continuation.Recipe(name=head.get("name", "unnamed"),
                               kind=head.get("kind", "homoclinic"),
                               initial=initial, stages=stages,
                               period=period, meta=meta)


def load_recipes(path):
    """Read one or several recipes from a sectioned file.

    A single-recipe file uses [recipe], [initial] and [stage N]; a file
    holding several uses numbered groups [recipe K], [initial K] and
    [stage K.N]. Returns a list either way.
    """
    import configparser
    cp = configparser.ConfigParser()
    with open(path) as fh:
        cp.read_string(fh.read())
    if "recipe" in cp:
        if "initial" not in cp:
            raise FormatError(f"recipe file {path} needs [recipe] and "
                              f"[initial] sections")
        stage_secs = sorted(
            (s for s in cp.sections() if s.startswith("stage")),
            key=lambda s: float(s.split()[1]))
        return [_parse_recipe(cp, "recipe", "initial", stage_secs, path)]
    tags = sorted((s.split()[1] for s in cp.sections()
                   if s.startswith("recipe ")), key=int)
    if not tags:
        raise FormatError(f"recipe file {path} needs [recipe] and "
                          f"[initial] sections")
    out = []
    for tag in tags:
        isec = f"initial {tag}"
        if isec not in cp:
            raise FormatError(f"recipe file {path} is missing [{isec}]")
        stage_secs = sorted(
            (s for s in cp.sections() if s.startswith(f"stage {tag}.")),
            key=lambda s: int(s.split(".")[-1]))
        out.append(_parse_recipe(cp, f"recipe {tag}", isec, stage_secs, path))
    return out


def load_recipe(path):
    """Read a sectioned recipe file; the first recipe if it holds several."""
    return load_recipes(path)[0]


# ---------------------------------------------------------------- manifests

def config_hash(text):
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def write_manifest(path, command, config_text="", inputs=(), outputs=(),
                   wall_time=0.0, seeds=None):
    """One JSON record per CLI invocation: what ran, on what, producing what."""
    from . import __version__
    doc = {
        "command": command,
        "config_hash": config_hash(config_text),
        "inputs": list(inputs),
        "outputs": list(outputs),
        "wall_time_s": round(float(wall_time), 3),
        "version": __version__,
        "seeds": {} if seeds is None else dict(seeds),
        "written": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path

"""Space-time rendering of pulsing orbits: rows of consecutive segments.

Cutting a time trace into segments of one period and stacking them makes a
pulse stationary; cutting into segments of one delay makes it drift by
delta = T - tau per row. The grid holds the x component only, which carries
the pulse structure.
"""

import dataclasses

import numpy as np

MODES = ("period", "multiple", "delay")


@dataclasses.dataclass
class SpaceTimeGrid:
    """Stacked segment samples of the x component plus segment metadata."""

    rows: int
    cols: int
    values: np.ndarray
    segment_mode: str
    segment_length: float
    drift: float
    period: float
    tau: float


def _segment_length(mode, T, tau, m):
    if mode == "period":
        return float(T)
    if mode == "multiple":
        return float(m) * float(T)
    if mode == "delay":
        if tau <= 0:
            raise ValueError("delay mode needs a positive delay")
        return float(tau)
    raise ValueError(f"mode must be one of {MODES}")


def build_grid(source, mode="delay", n_rows=100, n_cols=2048, m=1,
               period=None):
    """Stack n_rows consecutive segments of the source into a grid.

    source is a periodic orbit (segments generated by exact periodicity) or
    a trajectory (segments cut from the stored time span; pass period to
    use the period or multiple modes on one). mode picks the segment
    length: one period, m periods, or one delay. The drift records how far
    a pulse moves per row: the mismatch between the nearest whole multiple
    of the period and the delay (nan when the period is unknown).
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    is_traj = hasattr(source, "t_end")
    T = float(period) if period is not None else (
        np.nan if is_traj else float(source.period))
    tau = float(source.params.tau)
    L = _segment_length(mode, T, tau, m)
    if not np.isfinite(L):
        raise ValueError("period/multiple mode on a trajectory needs an "
                         "explicit period")
    t = (np.arange(n_rows)[:, None] * L
         + np.arange(n_cols)[None, :] * (L / n_cols))
    if is_traj:
        if t[-1, -1] > source.t_end + 1e-9 * max(1.0, source.t_end):
            raise ValueError(
                f"trajectory too short: need {t[-1, -1]:g}, "
                f"have {source.t_end:g}")
        x = source.evaluate(t.ravel())[:, 0]
    else:
        x = source.evaluate(((t / T) % 1.0).ravel())[:, 0]
    if np.isfinite(T):
        if mode == "delay":
            mult = max(1, int(round(tau / T)))
        else:
            mult = 1 if mode == "period" else m
        drift = mult * T - tau
    else:
        drift = np.nan
    return SpaceTimeGrid(rows=n_rows, cols=n_cols,
                         values=x.reshape(n_rows, n_cols),
                         segment_mode=mode, segment_length=L,
                         drift=float(drift), period=T, tau=tau)


def measure_drift(grid):
    """Average per-row feature shift, in time units, by cross-correlation.

    Each consecutive row pair is circularly cross-correlated; the peak lag
    (refined by parabolic interpolation) is the shift of that step, and the
    shifts are averaged over the grid. Positive drift means features move
    toward larger pseudo-space position as the row index grows.
    """
    V = grid.values - grid.values.mean(axis=1, keepdims=True)
    amp = V.max(axis=1) - V.min(axis=1)
    if np.any(amp < 1e-12 * max(1.0, np.abs(grid.values).max())):
        raise ValueError("no dominant peak: a row is flat")
    F = np.fft.rfft(V, axis=1)
    corr = np.fft.irfft(F[1:] * np.conj(F[:-1]), n=grid.cols, axis=1)
    lags = np.empty(len(corr))
    for i, c in enumerate(corr):
        k = int(np.argmax(c))
        cm, c0, cp = c[k - 1], c[k], c[(k + 1) % grid.cols]
        den = cm - 2.0 * c0 + cp
        frac = 0.0 if den == 0 else 0.5 * (cm - cp) / den
        lag = k + frac
        if lag > grid.cols / 2:
            lag -= grid.cols
        lags[i] = lag
    return float(np.mean(lags)) * grid.segment_length / grid.cols


def export_grid(grid, path):
    """Write the grid matrix plus a key = value sidecar (path + '.meta')."""
    np.savetxt(path, grid.values, fmt="%.10g", delimiter="\t")
    meta = path + ".meta"
    with open(meta, "w") as fh:
        fh.write(f"mode = {grid.segment_mode}\n"
                 f"rows = {grid.rows}\n"
                 f"cols = {grid.cols}\n"
                 f"segment_length = {grid.segment_length:.17g}\n"
                 f"delta = {grid.drift:.17g}\n"
                 f"period = {grid.period:.17g}\n"
                 f"tau = {grid.tau:.17g}\n")
    return path

"""Event CSV format: header `time,energy,angle[,weight]`, '#' comments.

Times are printed with 17 significant digits so a write/read round trip is
exact in double precision.
"""

import numpy as np

from .simulator import EventList

__all__ = ["write_events", "read_events"]

_COLUMNS = ("time", "energy", "angle")


def write_events(path, events, weights=None, header_comment=None):
    with open(path, "w") as fh:
        if header_comment:
            for line in header_comment.splitlines():
                fh.write("# %s\n" % line)
        cols = "time,energy,angle" + (",weight" if weights is not None else "")
        fh.write(cols + "\n")
        rows = [events.t, events.energy, events.angle]
        if weights is not None:
            rows.append(np.asarray(weights, dtype=float))
        for vals in zip(*rows):
            fh.write(",".join("%.17g" % v for v in vals) + "\n")


def read_events(path):
    """Parse an event CSV.  Returns (EventList, weights-or-None)."""
    t, energy, angle, weight = [], [], [], []
    has_weight = None
    with open(path) as fh:
        header = None
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = tuple(c.strip() for c in line.split(","))
                if header[:3] != _COLUMNS or len(header) > 4 or (
                    len(header) == 4 and header[3] != "weight"
                ):
                    raise ValueError(
                        "%s:%d: bad header %r; expected time,energy,angle"
                        "[,weight]" % (path, lineno, line)
                    )
                has_weight = len(header) == 4
                continue
            parts = line.split(",")
            if len(parts) != len(header):
                raise ValueError(
                    "%s:%d: expected %d fields, got %d: %r"
                    % (path, lineno, len(header), len(parts), line)
                )
            try:
                vals = [float(p) for p in parts]
            except ValueError:
                raise ValueError("%s:%d: unparseable row: %r" % (path, lineno, line))
            t.append(vals[0])
            energy.append(vals[1])
            angle.append(vals[2])
            if has_weight:
                weight.append(vals[3])
    if header is None or not t:
        raise ValueError("%s: no event rows" % path)
    order = np.argsort(np.asarray(t), kind="stable")
    ev = EventList(
        t=np.asarray(t)[order],
        energy=np.asarray(energy)[order],
        angle=np.asarray(angle)[order],
    )
    w = np.asarray(weight)[order] if has_weight else None
    return ev, w

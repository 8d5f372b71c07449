"""Standalone SVG plots of a trajectory log.

Data is drawn inside a group whose transform maps data coordinates to the
page, so the geometry in the file stays in metres, seconds or pixels.
"""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

W, H = 640, 480
MARGIN = 60


def _nice_ticks(lo, hi, n=5):
    span = hi - lo
    if span <= 0:
        return [lo]
    raw = span / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-9 * span:
        ticks.append(round(v, 10))
        v += step
    return ticks


class Figure:
    def __init__(self, title, xlabel, ylabel, xlim, ylim, equal=False, flip_y=False):
        (x0, x1), (y0, y1) = xlim, ylim
        if x1 <= x0:
            x0, x1 = x0 - 1, x0 + 1
        if y1 <= y0:
            y0, y1 = y0 - 1, y0 + 1
        pw, ph = W - 2 * MARGIN, H - 2 * MARGIN
        sx, sy = pw / (x1 - x0), ph / (y1 - y0)
        if equal:
            sx = sy = min(sx, sy)
        self.xlim, self.ylim = (x0, x1), (y0, y1)
        self.sx, self.sy = sx, sy
        self.flip_y = flip_y
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.items = []

    def page(self, x, y):
        px = MARGIN + (x - self.xlim[0]) * self.sx
        if self.flip_y:
            py = MARGIN + (y - self.ylim[0]) * self.sy
        else:
            py = H - MARGIN - (y - self.ylim[0]) * self.sy
        return px, py

    def _transform(self):
        if self.flip_y:
            return (f"matrix({self.sx!r} 0 0 {self.sy!r} {MARGIN - self.xlim[0] * self.sx!r} "
                    f"{MARGIN - self.ylim[0] * self.sy!r})")
        return (f"matrix({self.sx!r} 0 0 {-self.sy!r} {MARGIN - self.xlim[0] * self.sx!r} "
                f"{H - MARGIN + self.ylim[0] * self.sy!r})")

    def polyline(self, pts, cls, colour="#1f77b4", width=1.5):
        if pts:
            coords = " ".join(f"{x!r},{y!r}" for x, y in pts)
            self.items.append(f'<polyline class="{cls}" points="{coords}" fill="none" '
                              f'stroke="{colour}" stroke-width="{width}" '
                              f'vector-effect="non-scaling-stroke"/>')

    def line(self, a, b, cls, colour="#000", width=2.0):
        self.items.append(f'<line class="{cls}" x1="{a[0]!r}" y1="{a[1]!r}" x2="{b[0]!r}" '
                          f'y2="{b[1]!r}" stroke="{colour}" stroke-width="{width}" '
                          f'vector-effect="non-scaling-stroke"/>')

    def circle(self, c, r, cls, colour="#000"):
        self.items.append(f'<circle class="{cls}" cx="{c[0]!r}" cy="{c[1]!r}" r="{r!r}" '
                          f'fill="{colour}"/>')

    def render(self) -> str:
        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
               f'viewBox="0 0 {W} {H}">',
               f'<rect width="{W}" height="{H}" fill="white"/>',
               f'<text x="{W / 2}" y="30" text-anchor="middle" font-size="16">'
               f'{escape(self.title)}</text>']
        x0, y0 = self.page(self.xlim[0], self.ylim[0])
        x1, y1 = self.page(self.xlim[1], self.ylim[1])
        left, right = min(x0, x1), max(x0, x1)
        top, bottom = min(y0, y1), max(y0, y1)
        out.append(f'<rect class="axes" x="{left}" y="{top}" width="{right - left}" '
                   f'height="{bottom - top}" fill="none" stroke="#444"/>')
        for v in _nice_ticks(*self.xlim):
            px, _ = self.page(v, self.ylim[0])
            out.append(f'<text x="{px:.1f}" y="{bottom + 16:.1f}" text-anchor="middle" '
                       f'font-size="11">{v:g}</text>')
        for v in _nice_ticks(*self.ylim):
            _, py = self.page(self.xlim[0], v)
            out.append(f'<text x="{left - 6:.1f}" y="{py + 4:.1f}" text-anchor="end" '
                       f'font-size="11">{v:g}</text>')
        out.append(f'<text x="{W / 2}" y="{H - 15}" text-anchor="middle" font-size="13">'
                   f'{escape(self.xlabel)}</text>')
        out.append(f'<text x="15" y="{H / 2}" text-anchor="middle" font-size="13" '
                   f'transform="rotate(-90 15 {H / 2})">{escape(self.ylabel)}</text>')
        out.append(f'<g id="data" transform="{self._transform()}">')
        out.extend(self.items)
        out.append("</g></svg>")
        return "\n".join(out) + "\n"


def _limits(values, pad=0.05, default=(0.0, 1.0)):
    vals = [v for v in values if v is not None]
    if not vals:
        return default
    lo, hi = min(vals), max(vals)
    span = hi - lo or 1.0
    return lo - pad * span, hi + pad * span


def trajectory_figure(records, course=None) -> Figure:
    """Arena view. With a course, the path is the camera's, the point gates are judged at."""
    offset = course.camera.mount_offset if course is not None else 0.0
    path = [(r.x + offset * math.cos(r.theta), r.y + offset * math.sin(r.theta)) for r in records]
    xs = [p[0] for p in path]
    ys = [p[1] for p in path]
    if course is not None:
        for g in course.gates:
            xs.append(g.x)
            ys.append(g.y)
    fig = Figure("Arena path", "x (m)", "y (m)", _limits(xs), _limits(ys), equal=True)
    if course is not None:
        for c in course.clutter:
            fig.circle((c.x, c.y), 0.06, "clutter", "#999")
        for g in course.gates:
            obs = g.obstacles()
            if len(obs) == 2:
                fig.line(obs[0][:2], obs[1][:2], "gate", "#d62728")
            for cx, cy, r in obs:
                fig.circle((cx, cy), max(r, 0.03), "post", "#d62728")
    fig.polyline(path, "path")
    return fig


def velocity_figure(records) -> Figure:
    ts = [r.t for r in records]
    vs = [r.v for r in records]
    fig = Figure("Velocity", "t (s)", "v (m/s)", _limits(ts), _limits(vs + [0.0]))
    fig.polyline(list(zip(ts, vs)), "velocity")
    return fig


def steering_figure(records) -> Figure:
    ts = [r.t for r in records]
    ss = [r.steer for r in records]
    fig = Figure("Steering angle", "t (s)", "steer (rad)", _limits(ts), _limits(ss + [0.0]))
    fig.polyline(list(zip(ts, ss)), "steer")
    return fig


def image_plane_figure(records) -> Figure:
    fig = Figure("Disk positions in the image", "column (px)", "row (px)",
                 (0.0, 255.0), (0.0, 255.0), equal=True, flip_y=True)
    colours = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728")
    for i in range(4):
        run = []
        for r in records:
            if r.points is None:
                fig.polyline(run, f"disk{i + 1}", colours[i], 1.0)
                run = []
            else:
                row, col = r.points[i]
                run.append((float(col), float(row)))
        fig.polyline(run, f"disk{i + 1}", colours[i], 1.0)
    return fig


def write_plots(records, out_dir, course=None) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    figures = {
        "trajectory.svg": trajectory_figure(records, course),
        "velocity.svg": velocity_figure(records),
        "steering.svg": steering_figure(records),
        "image_plane.svg": image_plane_figure(records),
    }
    paths = []
    for name, fig in figures.items():
        p = out / name
        p.write_text(fig.render())
        paths.append(p)
    return paths

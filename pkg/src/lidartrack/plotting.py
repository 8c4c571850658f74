"""Bird's-eye-view SVG rendering of frames, detections, and tracks.

Plain hand-assembled SVG text: deterministic output, nothing to install,
and tests can assert on the markup directly. World coordinates are city
frame meters, drawn with +x right and +y up.
"""

from __future__ import annotations

import io

import numpy as np

CANVAS_W = 900
CANVAS_H = 700
PAD = 40.0


def _f(v: float) -> str:
    return f"{v:.2f}"


class BevView:
    """World-to-canvas mapping with equal scale on both axes."""

    def __init__(self, xmin, ymin, xmax, ymax):
        if xmax <= xmin:
            xmax = xmin + 1.0
        if ymax <= ymin:
            ymax = ymin + 1.0
        sx = (CANVAS_W - 2 * PAD) / (xmax - xmin)
        sy = (CANVAS_H - 2 * PAD) / (ymax - ymin)
        self.scale = min(sx, sy)
        self.xmin = xmin
        self.ymin = ymin

    def x(self, wx: float) -> float:
        return PAD + (wx - self.xmin) * self.scale

    def y(self, wy: float) -> float:
        return CANVAS_H - PAD - (wy - self.ymin) * self.scale


def view_bounds(points_xy=None, boxes=None, drivable=None, default=10.0):
    """Bounds covering everything that will be drawn."""
    xs, ys = [], []
    if points_xy is not None and len(points_xy):
        pts = np.asarray(points_xy, dtype=np.float64)
        xs += [pts[:, 0].min(), pts[:, 0].max()]
        ys += [pts[:, 1].min(), pts[:, 1].max()]
    for box in boxes or []:
        cx, cy, half_l, half_w = box
        xs += [cx - half_l, cx + half_l]
        ys += [cy - half_w, cy + half_w]
    if drivable is not None:
        ox, oy = drivable.origin_xy
        xs += [ox, ox + drivable.width * drivable.resolution]
        ys += [oy, oy + drivable.height * drivable.resolution]
    if not xs:
        return -default, -default, default, default
    margin = 2.0
    return min(xs) - margin, min(ys) - margin, max(xs) + margin, max(ys) + margin


def render_frame_svg(
    frame_index: int,
    points_xy,
    detections,
    tracks,
    drivable=None,
    bounds=None,
) -> str:
    """Render one frame.

    points_xy: (N, 2) city-frame points (post-preprocess scatter).
    detections: iterables of (cx, cy, length, width).
    tracks: iterables of (track_id, cx, cy, length, width).
    bounds: optional (xmin, ymin, xmax, ymax) to keep a steady viewport
    across frames.
    """
    det_boxes = [(cx, cy, l / 2, w / 2) for cx, cy, l, w in detections]
    trk_boxes = [(cx, cy, l / 2, w / 2) for _, cx, cy, l, w in tracks]
    if bounds is None:
        bounds = view_bounds(points_xy, det_boxes + trk_boxes, drivable)
    view = BevView(*bounds)

    out = io.StringIO()
    out.write(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS_W}" height="{CANVAS_H}" '
        f'viewBox="0 0 {CANVAS_W} {CANVAS_H}">\n'
    )
    out.write('<rect width="100%" height="100%" fill="white"/>\n')
    # Axes frame and labels.
    out.write(
        f'<rect class="axes" x="{_f(PAD)}" y="{_f(PAD)}" width="{_f(CANVAS_W - 2 * PAD)}" '
        f'height="{_f(CANVAS_H - 2 * PAD)}" fill="none" stroke="black"/>\n'
    )
    out.write(
        f'<text x="{_f(CANVAS_W / 2)}" y="{_f(CANVAS_H - 10)}" class="axis-label" '
        f'text-anchor="middle" font-size="12">x [m] (frame {frame_index})</text>\n'
    )
    out.write(
        f'<text x="14" y="{_f(CANVAS_H / 2)}" class="axis-label" text-anchor="middle" '
        f'font-size="12" transform="rotate(-90 14 {_f(CANVAS_H / 2)})">y [m]</text>\n'
    )

    if drivable is not None:
        ox, oy = drivable.origin_xy
        x0 = view.x(float(ox))
        y1 = view.y(float(oy))
        x1 = view.x(float(ox + drivable.width * drivable.resolution))
        y0 = view.y(float(oy + drivable.height * drivable.resolution))
        out.write(
            f'<rect class="drivable" x="{_f(x0)}" y="{_f(y0)}" width="{_f(x1 - x0)}" '
            f'height="{_f(y1 - y0)}" fill="none" stroke="#888" stroke-dasharray="6 4"/>\n'
        )

    if points_xy is not None and len(points_xy):
        pts = np.asarray(points_xy, dtype=np.float64)
        for px, py in pts:
            out.write(
                f'<circle class="pt" cx="{_f(view.x(px))}" cy="{_f(view.y(py))}" '
                f'r="1.2" fill="#4477aa"/>\n'
            )

    for cx, cy, half_l, half_w in det_boxes:
        out.write(
            f'<rect class="det" x="{_f(view.x(cx - half_l))}" y="{_f(view.y(cy + half_w))}" '
            f'width="{_f(2 * half_l * view.scale)}" height="{_f(2 * half_w * view.scale)}" '
            f'fill="none" stroke="#228833"/>\n'
        )

    for (tid, cx, cy, l, w), (bx, by, half_l, half_w) in zip(tracks, trk_boxes):
        out.write(
            f'<rect class="track" x="{_f(view.x(bx - half_l))}" y="{_f(view.y(by + half_w))}" '
            f'width="{_f(2 * half_l * view.scale)}" height="{_f(2 * half_w * view.scale)}" '
            f'fill="none" stroke="#cc3311" stroke-width="1.5"/>\n'
        )
        out.write(
            f'<text class="track-id" x="{_f(view.x(bx - half_l))}" '
            f'y="{_f(view.y(by + half_w) - 3)}" font-size="11" fill="#cc3311">{tid}</text>\n'
        )

    out.write("</svg>\n")
    return out.getvalue()

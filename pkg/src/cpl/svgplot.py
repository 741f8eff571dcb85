"""A small SVG scatter emitter so figures need no plotting dependency.

The output is plain text, deterministic for fixed inputs, and parseable by
any XML reader, which keeps figures diffable and golden-testable.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError

WIDTH = 640
HEIGHT = 480
MARGIN = 48


def class_color(k: int, num_classes: int) -> str:
    hue = round(360.0 * k / max(num_classes, 1))
    return f"hsl({hue}, 70%, 42%)"


def _fmt(x: float) -> str:
    return format(float(x), ".3f")


class _Frame:
    """Data-to-pixel mapping with a padded bounding box (y axis flipped)."""

    def __init__(self, xs, ys):
        lo_x, hi_x = float(np.min(xs)), float(np.max(xs))
        lo_y, hi_y = float(np.min(ys)), float(np.max(ys))
        pad_x = 0.08 * (hi_x - lo_x) or 1.0
        pad_y = 0.08 * (hi_y - lo_y) or 1.0
        self.lo_x, self.hi_x = lo_x - pad_x, hi_x + pad_x
        self.lo_y, self.hi_y = lo_y - pad_y, hi_y + pad_y

    def x(self, v: float) -> float:
        t = (v - self.lo_x) / (self.hi_x - self.lo_x)
        return MARGIN + t * (WIDTH - 2 * MARGIN)

    def y(self, v: float) -> float:
        t = (v - self.lo_y) / (self.hi_y - self.lo_y)
        return HEIGHT - MARGIN - t * (HEIGHT - 2 * MARGIN)


def scatter_svg(points, labels, correct, proxies, title: str = "") -> str:
    """Render features as dots (misclassified as crosses) over the proxy chain.

    ``points`` and ``proxies`` must be 2-d coordinates; ``labels`` colors the
    markers by true class and ``correct`` picks the marker shape.
    """
    points = np.asarray(points, dtype=np.float64)
    proxies = np.asarray(proxies, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    correct = np.asarray(correct, dtype=bool)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ConfigurationError(f"points must be n x 2, got {points.shape}")
    if proxies.ndim != 2 or proxies.shape[1] != 2:
        raise ConfigurationError(f"proxies must be K x 2, got {proxies.shape}")
    if labels.shape[0] != points.shape[0] or correct.shape[0] != points.shape[0]:
        raise ConfigurationError("labels and correct flags must match points")
    num_classes = proxies.shape[0]

    frame = _Frame(
        np.concatenate([points[:, 0], proxies[:, 0]]),
        np.concatenate([points[:, 1], proxies[:, 1]]),
    )
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH - 2 * MARGIN}" '
        f'height="{HEIGHT - 2 * MARGIN}" fill="none" stroke="#444"/>',
    ]
    if title:
        parts.append(
            f'<text x="{WIDTH // 2}" y="{MARGIN - 16}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="15">{title}</text>'
        )
    parts.append(
        f'<text x="{MARGIN}" y="{HEIGHT - MARGIN + 18}" font-family="sans-serif" '
        f'font-size="11">x: {_fmt(frame.lo_x)} .. {_fmt(frame.hi_x)}, '
        f'y: {_fmt(frame.lo_y)} .. {_fmt(frame.hi_y)}</text>'
    )

    for p, label, ok in zip(points, labels, correct):
        cx, cy = frame.x(p[0]), frame.y(p[1])
        color = class_color(int(label), num_classes)
        if ok:
            parts.append(
                f'<circle class="sample-correct" cx="{_fmt(cx)}" cy="{_fmt(cy)}" '
                f'r="3" fill="{color}" fill-opacity="0.7"/>'
            )
        else:
            # Misclassified samples draw as crosses so they stand out.
            parts.append(
                f'<path class="sample-wrong" d="M {_fmt(cx - 4)} {_fmt(cy - 4)} '
                f'L {_fmt(cx + 4)} {_fmt(cy + 4)} M {_fmt(cx - 4)} {_fmt(cy + 4)} '
                f'L {_fmt(cx + 4)} {_fmt(cy - 4)}" stroke="{color}" '
                f'stroke-width="1.8" fill="none"/>'
            )

    chain = " ".join(
        f"{_fmt(frame.x(p[0]))},{_fmt(frame.y(p[1]))}" for p in proxies
    )
    parts.append(
        f'<polyline class="proxy-chain" points="{chain}" fill="none" '
        f'stroke="#888" stroke-dasharray="4 3"/>'
    )
    for k, p in enumerate(proxies):
        cx, cy = frame.x(p[0]), frame.y(p[1])
        color = class_color(k, num_classes)
        parts.append(
            f'<circle class="proxy" cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="7" '
            f'fill="{color}" stroke="black" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{_fmt(cx + 9)}" y="{_fmt(cy - 7)}" '
            f'font-family="sans-serif" font-size="12">{k}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"

#pragma once

namespace wordgaze {

/// A point in page space (CSS pixels, origin at the top-left of the document).
struct PagePoint {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const PagePoint&, const PagePoint&) = default;
};

/// A gaze point with its timestamp, already mapped to page space.
struct TimedPoint {
    double t_ms = 0.0;
    double x = 0.0;
    double y = 0.0;
};

/// Closed axis-aligned rectangle [x0, x1] x [y0, y1].
struct Rect {
    double x0 = 0.0;
    double y0 = 0.0;
    double x1 = 0.0;
    double y1 = 0.0;

    bool contains(PagePoint p) const noexcept {
        return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1;
    }
};

} // namespace wordgaze

#pragma once

namespace ivanet {

/// Corner-form box in normalized image coordinates.
struct Box {
    double xmin = 0, ymin = 0, xmax = 0, ymax = 0;

    double width() const { return xmax - xmin; }
    double height() const { return ymax - ymin; }
    double area() const { return width() > 0 && height() > 0 ? width() * height() : 0.0; }
    friend bool operator==(const Box&, const Box&) = default;
};

/// Center-size box (cx, cy, w, h).
struct CenterBox {
    double cx = 0, cy = 0, w = 0, h = 0;

    Box corners() const { return {cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2}; }
    static CenterBox from(const Box& b) {
        return {(b.xmin + b.xmax) / 2, (b.ymin + b.ymax) / 2, b.xmax - b.xmin, b.ymax - b.ymin};
    }
};

/// Class-labeled ground-truth box; class 0 is background and never appears.
struct GtBox {
    int class_id = 1;
    Box box;
};

}  // namespace ivanet

#pragma once

#include <array>
#include <string>

#include "sketchinpaint/grid.hpp"
#include "sketchinpaint/random.hpp"

namespace sketchinpaint {

// Scan directions, named by where the sweep starts and where it heads.
enum class ScanDirection { right_to_left, left_to_right, down_to_up, up_to_down };

const char* direction_name(ScanDirection dir);  // "R2L", "L2R", "D2U", "U2D"
ScanDirection parse_direction(const std::string& name);
ScanDirection draw_direction(Rng& rng);

// Cubic Bezier in the scan frame: `along` runs with the sweep (0 at the start
// edge), `across` spans the perpendicular edges.
struct CubicBezier {
    struct Point {
        double along = 0.0;
        double across = 0.0;
    };
    std::array<Point, 4> p;
    Point at(double t) const;
};

// Endpoints uniform on the two edges perpendicular to the scan, control points
// uniform over the canvas (all in scan-frame coordinates).
CubicBezier random_scan_curve(int along_extent, int across_extent, Rng& rng);

struct PartialMaskResult {
    Grid pm;                  // 1 = visible, 0 = corrupted
    double coverage = 0.0;    // |corrupted| / |mask|
    double step_increment = 0.0;  // coverage added by the final sweep step
    bool fallback = false;    // straight pixel-order scan was used
    int steps = 0;
};

// Translates the curve rigidly from outside the start edge in one-pixel steps;
// the region behind its leading front accumulates until it covers at least
// `coverage_target` of the mask. pm is 0 on swept pixels of the mask and 1
// elsewhere. When one step would push coverage above `coverage_ceiling`, the
// mask pixels are instead taken in scan order until the target is met.
PartialMaskResult bezier_partial_mask(const Grid& mask, ScanDirection dir, double coverage_target, Rng& rng,
                                      double coverage_ceiling = 0.61);
PartialMaskResult bezier_partial_mask(const Grid& mask, ScanDirection dir, double coverage_target,
                                      const CubicBezier& curve, double coverage_ceiling = 0.61);

}  // namespace sketchinpaint
